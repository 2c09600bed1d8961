use crate::cases::{padded, ranking, CaseReport, Scenario};
use crate::error::Result;
use crate::market::{AgentId, Market, Matching, PreferenceProfile};
use crate::mechanism::{rank_distribution, Mechanism, RandomMatching};
use crate::prior::{marginal_types, product_prior, AgentTypeDistribution, Prior};
use crate::rational::Rational;
use crate::stability::search::{ex_ante_block, ex_ante_pairwise_stable};
use crate::stability::witness::Coalition;

/// The 3×3 product prior in which only m1 and w1 are uncertain: each has its
/// first listed type with probability `1 − 2p` and each other type with probability `p`.
pub fn example3_prior(p: &Rational) -> Result<Prior> {
    let market = Market::square(3);
    let rest = Rational::one() - Rational::from_integer(2) * p;
    let three = |owner: &str, lists: [&str; 3]| -> Result<AgentTypeDistribution> {
        AgentTypeDistribution::new(
            AgentId::parse(owner)?,
            vec![
                (ranking(market, owner, lists[0])?, rest.clone()),
                (ranking(market, owner, lists[1])?, p.clone()),
                (ranking(market, owner, lists[2])?, p.clone()),
            ],
        )
    };
    let one = |owner: &str, list: &str| -> Result<AgentTypeDistribution> {
        Ok(AgentTypeDistribution::single(ranking(market, owner, list)?))
    };
    product_prior(
        market,
        vec![
            three("m1", ["w1,w3,w2", "w2,w1,w3", "w3,w2,w1"])?,
            one("m2", "w1,w2")?,
            one("m3", "w3")?,
            three("w1", ["m1,m3,m2", "m2,m1,m3", "m3,m2,m1"])?,
            one("w2", "m1,m2")?,
            one("w3", "m3")?,
        ],
    )
}

fn prob(rm: &RandomMatching, pairs: &[(usize, usize)]) -> Rational {
    rm.outcomes()
        .iter()
        .filter(|(m, _)| pairs.iter().all(|&(i, j)| m.partner(AgentId::man(i)) == AgentId::woman(j)))
        .map(|(_, w)| w)
        .sum()
}

/// Checks, at `profile`, the matches any ex-post pairwise stable mechanism is
/// forced into: m3–w3 always; m1–w2 and m2–w1 when m1 prefers w2 to w1 or w1
/// prefers m2 to m1; m1–w1 when they prefer each other over m2 and w2.
pub fn forced_matches_hold(rm: &RandomMatching, profile: &PreferenceProfile) -> bool {
    let (m1, w1, m2, w2) = (AgentId::man(0), AgentId::woman(0), AgentId::man(1), AgentId::woman(1));
    let rank = |a: AgentId, b: AgentId| profile.rank_of(a, b).expect("opposite sides");
    let one = Rational::one();
    let mut ok = prob(rm, &[(2, 2)]) == one;
    let m1_prefers_w2 = rank(m1, w2) < rank(m1, w1);
    let w1_prefers_m2 = rank(w1, m2) < rank(w1, m1);
    if m1_prefers_w2 || w1_prefers_m2 {
        ok &= prob(rm, &[(0, 1), (1, 0)]) == one;
    } else {
        ok &= prob(rm, &[(0, 0)]) == one;
    }
    ok
}

pub(crate) fn run(p: &Rational, scenario: &Scenario, report: &mut CaseReport) -> Result<()> {
    let prior = &scenario.prior;
    let one = Rational::one();
    let two = Rational::from_integer(2);
    let four = Rational::from_integer(4);
    let rest = &one - &two * p;
    report.claim("support size", 9usize, prior.len());
    let top = prior.support().iter().map(|(_, w)| w.clone()).max().unwrap_or_else(Rational::zero);
    report.claim("weight of the most likely profile", &rest * &rest, top);
    let (m1, w1) = (AgentId::man(0), AgentId::woman(0));
    for a in [m1, w1] {
        let weights: Vec<Rational> = marginal_types(prior, a)?.into_iter().map(|(_, w)| w).collect();
        let mut sorted = weights.clone();
        sorted.sort();
        sorted.reverse();
        report.claim(format!("{a} type weights"), vec![rest.clone(), p.clone(), p.clone()], sorted);
    }

    let p2 = p * p;
    let stable_ranks = padded(vec![&one - Rational::from_integer(3) * p + &four * &p2, p.clone(), &two * p - &four * &p2], 4);
    let paired_ranks = padded(vec![rest.clone(), p.clone(), p.clone()], 4);
    let pair = Coalition::pair(0, 0);
    for mech in &scenario.mechanisms {
        let held = prior
            .support()
            .iter()
            .map(|(profile, _)| Ok(forced_matches_hold(&mech.evaluate(profile)?, profile)))
            .collect::<Result<Vec<bool>>>()?;
        report.claim(format!("{}: forced matches hold on support profiles", mech.name()), 9usize, held.iter().filter(|&&b| b).count());
        for a in [m1, w1] {
            report.claim(format!("{}: {a} ranks", mech.name()), stable_ranks.clone(), rank_distribution(mech, prior, a)?.mass);
        }
        let sweep = ex_ante_pairwise_stable(mech, prior)?;
        let found = sweep.witness.as_ref().map(|w| w.coalition.to_string()).unwrap_or_else(|| "none".into());
        report.claim(format!("{}: first pairwise ex-ante block", mech.name()), pair.to_string(), found);
    }

    let rs = Mechanism::RandomStable;
    if let Some(w) = ex_ante_block(&rs, prior, &pair)? {
        let together = Matching::from_pairs(scenario.market, &[(0, 0)])?;
        let always = w.deviation.rules().values().all(|rm| rm == &RandomMatching::point(together.clone()));
        report.claim("deviation matches m1 and w1 on every profile", true, always);
        for ev in &w.per_agent {
            report.claim(format!("{} ranks when paired", ev.agent), paired_ranks.clone(), ev.after.mass.clone());
            report.claim(format!("{} dominance thresholds", ev.agent), "[1, 2]", format!("{:?}", ev.verdict.thresholds));
        }
        report.witness("m1 and w1, ex ante", w.to_json_value());
    } else {
        report.claim("m1 and w1 block ex ante", true, false);
    }
    report.claim("{m3, w3} blocks ex ante", false, ex_ante_block(&rs, prior, &Coalition::pair(2, 2))?.is_some());
    Ok(())
}
