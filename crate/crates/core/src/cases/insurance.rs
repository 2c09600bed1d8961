use crate::cases::{padded, ranking, CaseReport, Scenario};
use crate::error::{Error, Result};
use crate::market::{AgentId, Market, Matching};
use crate::mechanism::{
    expected_utility, rank_distribution, stable_set, Mechanism, RandomMatching, RankDistribution, UtilityFunction,
};
use crate::prior::{product_prior, AgentTypeDistribution, Prior};
use crate::rational::Rational;
use crate::stability::fosd::{fosd_compare, Dominance};

/// Everyone ranks the other side in index order, except that m1 puts w3 first
/// and w1 puts m3 first, each independently with probability `p`.
pub fn insurance_prior(p: &Rational) -> Result<Prior> {
    let market = Market::square(3);
    let rest = Rational::one() - p;
    let two = |owner: &str, usual: &str, odd: &str| -> Result<AgentTypeDistribution> {
        AgentTypeDistribution::new(
            AgentId::parse(owner)?,
            vec![(ranking(market, owner, usual)?, rest.clone()), (ranking(market, owner, odd)?, p.clone())],
        )
    };
    let one = |owner: &str, list: &str| -> Result<AgentTypeDistribution> {
        Ok(AgentTypeDistribution::single(ranking(market, owner, list)?))
    };
    product_prior(
        market,
        vec![
            two("m1", "w1,w2,w3", "w3,w1,w2")?,
            one("m2", "w1,w2,w3")?,
            one("m3", "w1,w2,w3")?,
            two("w1", "m1,m2,m3", "m3,m1,m2")?,
            one("w2", "m1,m2,m3")?,
            one("w3", "m1,m2,m3")?,
        ],
    )
}

/// m2 and w2 under the stable mechanism versus pairing off with each other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsuranceCheck {
    /// Size of the stable set at each support profile.
    pub stable_set_sizes: Vec<usize>,
    pub m2: RankDistribution,
    pub w2: RankDistribution,
    /// `(stable, paired)` expected utilities of m2 and of w2.
    pub m2_utility: (Rational, Rational),
    pub w2_utility: (Rational, Rational),
    /// Pairing off compared with the stable lottery, for m2 and for w2.
    pub m2_dominance: Dominance,
    pub w2_dominance: Dominance,
}

/// `utilities` are the values of a first, second and third choice, shared by m2 and w2;
/// staying single is worth the least of them.
pub fn insurance_check(p: &Rational, utilities: &[Rational; 3]) -> Result<InsuranceCheck> {
    let prior = insurance_prior(p)?;
    let market = prior.market();
    let mut stable_set_sizes = Vec::new();
    for (profile, _) in prior.support() {
        stable_set_sizes.push(stable_set(profile)?.len());
    }
    let stable = Mechanism::RandomStable;
    let pair_off = {
        let together = Matching::from_pairs(market, &[(1, 1)])?;
        Mechanism::custom("pair m2 with w2", move |_| Ok(RandomMatching::point(together.clone())))
    };
    let floor = utilities.iter().min().cloned().ok_or_else(|| Error::Invalid("no utilities".into()))?;
    let (m2, w2) = (AgentId::man(1), AgentId::woman(1));
    let utility_of = |agent: AgentId| -> Result<UtilityFunction> {
        let mut values: Vec<(AgentId, Rational)> =
            (0..3).map(|j| (AgentId { side: agent.side.opposite(), index: j }, utilities[j].clone())).collect();
        values.push((agent, floor.clone()));
        UtilityFunction::new(market, agent, &values)
    };
    let compare = |agent: AgentId| -> Result<(RankDistribution, (Rational, Rational), Dominance)> {
        let before = rank_distribution(&stable, &prior, agent)?;
        let after = rank_distribution(&pair_off, &prior, agent)?;
        let u = utility_of(agent)?;
        let eu = (expected_utility(&stable, &prior, agent, &u)?, expected_utility(&pair_off, &prior, agent, &u)?);
        let relation = fosd_compare(&after, &before)?.relation;
        Ok((before, eu, relation))
    };
    let (m2_dist, m2_utility, m2_dominance) = compare(m2)?;
    let (w2_dist, w2_utility, w2_dominance) = compare(w2)?;
    Ok(InsuranceCheck {
        stable_set_sizes,
        m2: m2_dist,
        w2: w2_dist,
        m2_utility,
        w2_utility,
        m2_dominance,
        w2_dominance,
    })
}

pub(crate) fn run(p: &Rational, utilities: &[Rational; 3], _scenario: &Scenario, report: &mut CaseReport) -> Result<()> {
    let check = insurance_check(p, utilities)?;
    report.claim("support profiles with a unique stable matching", 4usize, check.stable_set_sizes.iter().filter(|&&n| n == 1).count());
    let one = Rational::one();
    let q = &one - p;
    let edge = p * &q;
    let closed = padded(vec![edge.clone(), &q * &q + p * p, edge], 4);
    report.claim("m2 ranks under the stable mechanism", closed.clone(), check.m2.mass.clone());
    report.claim("w2 ranks under the stable mechanism", closed, check.w2.mass.clone());
    for (name, dist, (stable, paired), dominance) in [
        ("m2", &check.m2, &check.m2_utility, check.m2_dominance),
        ("w2", &check.w2, &check.w2_utility, check.w2_dominance),
    ] {
        let expected_stable: Rational = dist.mass.iter().zip(utilities).map(|(m, u)| m * u).sum();
        report.claim(format!("{name} expected utility when participating"), expected_stable, stable.clone());
        report.claim(format!("{name} expected utility when pairing off"), utilities[1].clone(), paired.clone());
        let verdict = match stable.cmp(paired) {
            std::cmp::Ordering::Less => "pair off",
            std::cmp::Ordering::Equal => "indifferent",
            std::cmp::Ordering::Greater => "participate",
        };
        report.claim(format!("{name} prefers (expected utility)"), preferred(utilities), verdict);
        report.claim(format!("{name} pairing off versus participating"), Dominance::Incomparable.to_string(), dominance.to_string());
    }
    Ok(())
}

/// First and third choices are equally likely, so pairing off wins iff the
/// second choice beats the average of the first and third.
fn preferred(u: &[Rational; 3]) -> &'static str {
    let average = (&u[0] + &u[2]) / Rational::from_integer(2);
    match u[1].cmp(&average) {
        std::cmp::Ordering::Greater => "pair off",
        std::cmp::Ordering::Equal => "indifferent",
        std::cmp::Ordering::Less => "participate",
    }
}
