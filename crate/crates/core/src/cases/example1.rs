use crate::cases::{padded, CaseReport, Scenario};
use crate::error::{Error, Result};
use crate::lp::{solve, Constraint, LinearProgram, LpOutcome, Relation};
use crate::market::{AgentId, Market, Matching, PreferenceProfile};
use crate::mechanism::{all_matchings, deferred_acceptance, rank_distribution, stable_set, Mechanism, RandomMatching};
use crate::market::Side;
use crate::rational::Rational;
use crate::stability::search::{ex_post_block, ex_post_stable_at};
use crate::stability::witness::{coalitions_up_to, Coalition};

/// Complete 3×3 preferences whose only stable matching is {m1w2, m2w3, m3w1}.
pub fn example1_profile() -> PreferenceProfile {
    PreferenceProfile::from_lists(
        Market::square(3),
        &["w1,w2,w3", "w1,w3,w2", "w2,w1,w3"],
        &["m3,m2,m1", "m2,m1,m3", "m3,m2,m1"],
    )
    .expect("valid fixed profile")
}

/// Optima over lotteries on all matchings that weakly dominate `mechanism` at
/// `profile` for all six agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example1Slack {
    /// Largest summed strictness slack any single agent can get (subject to every agent's weak dominance).
    pub max_slack: Rational,
    /// For each compared pair of perfect matchings, the (max, min) of `q(a) − q(b)`.
    pub gaps: Vec<(Matching, Matching, Rational, Rational)>,
    /// Largest total weight on matchings that leave someone single.
    pub imperfect_mass: Rational,
}

fn optimum(lp: &LinearProgram) -> Result<Rational> {
    match solve(lp)? {
        LpOutcome::Optimal { value, .. } => Ok(value),
        other => Err(Error::Internal(format!("dominance polytope program ended {other:?}"))),
    }
}

/// Solves the grand-coalition dominance programs at `profile`. `cycles` lists
/// triples of perfect matchings whose weights are compared pairwise.
pub fn grand_coalition_slack(
    mechanism: &Mechanism,
    profile: &PreferenceProfile,
    cycles: &[[Matching; 3]],
) -> Result<Example1Slack> {
    let market = profile.market();
    let matchings = all_matchings(market)?;
    let before = mechanism.evaluate(profile)?;
    let n = matchings.len();
    let mut base = LinearProgram::new(n + 1);
    let mut all = vec![Rational::zero(); n + 1];
    all[..n].fill(Rational::one());
    base.add_dense(&all, Relation::Eq, Rational::one())?;
    let mut slack_rows = Vec::new();
    for agent in market.agents() {
        let cdf = crate::mechanism::RankDistribution::new(agent, before.rank_masses(profile, agent))?.cdf();
        let mut sum = vec![Rational::zero(); n + 1];
        let mut sum_rhs = Rational::zero();
        for k in 1..market.domain_size(agent.side) {
            let row: Vec<(usize, Rational)> = matchings
                .iter()
                .enumerate()
                .filter(|(_, m)| profile.rank_under(agent, m) <= k)
                .map(|(i, _)| (i, Rational::one()))
                .collect();
            for (i, c) in &row {
                sum[*i] += c;
            }
            sum_rhs += &cdf[k - 1];
            base.add_constraint(Constraint::new(row, Relation::Ge, cdf[k - 1].clone()))?;
        }
        sum[n] = -Rational::one();
        slack_rows.push((sum, sum_rhs));
    }

    // Best strictness for one agent at a time: a block needs all of them positive at once,
    // so every one being zero settles it.
    let mut max_slack = Rational::zero();
    for (row, rhs) in &slack_rows {
        let mut lp = base.clone();
        lp.add_dense(row, Relation::Ge, rhs.clone())?;
        lp.set_objective(vec![(n, Rational::one())])?;
        let v = optimum(&lp)?;
        if v > max_slack {
            max_slack = v;
        }
    }

    let index = |m: &Matching| {
        matchings.iter().position(|x| x == m).ok_or_else(|| Error::Invalid(format!("{m} is not a matching of the market")))
    };
    let mut gaps = Vec::new();
    for cycle in cycles {
        for (a, b) in [(&cycle[0], &cycle[1]), (&cycle[1], &cycle[2])] {
            let (ia, ib) = (index(a)?, index(b)?);
            let mut lp = base.clone();
            lp.set_objective(vec![(ia, Rational::one()), (ib, -Rational::one())])?;
            let hi = optimum(&lp)?;
            lp.set_objective(vec![(ia, -Rational::one()), (ib, Rational::one())])?;
            let lo = -optimum(&lp)?;
            gaps.push((a.clone(), b.clone(), hi, lo));
        }
    }

    let full = market.num_men.min(market.num_women);
    let mut lp = base.clone();
    lp.set_objective(matchings.iter().enumerate().filter(|(_, m)| m.size() < full).map(|(i, _)| (i, Rational::one())).collect())?;
    let imperfect_mass = optimum(&lp)?;
    Ok(Example1Slack { max_slack, gaps, imperfect_mass })
}

/// Coalitions that could possibly block a mechanism giving everyone their top
/// choice with positive probability: closed under "my favourite is a member" and
/// balanced between the sides.
fn candidate_blockers(profile: &PreferenceProfile) -> Vec<Coalition> {
    coalitions_up_to(profile.market(), profile.market().num_agents())
        .filter(|c| {
            let men = c.members().iter().filter(|a| a.side == Side::Man).count();
            men * 2 == c.len() && c.members().iter().all(|&a| c.contains(profile.ranking(a).at_rank(1)))
        })
        .collect()
}

fn m(pairs: &[(usize, usize)]) -> Matching {
    Matching::from_pairs(Market::square(3), pairs).expect("valid fixed matching")
}

pub(crate) fn run(scenario: &Scenario, report: &mut CaseReport) -> Result<()> {
    let profile = example1_profile();
    let unique = m(&[(0, 1), (1, 2), (2, 0)]);
    let listed = |ms: &[Matching]| ms.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    report.claim("stable set", unique.to_string(), listed(&stable_set(&profile)?));
    for side in [Side::Man, Side::Woman] {
        report.claim(
            format!("deferred acceptance, {side:?} proposing"),
            unique.to_string(),
            deferred_acceptance(&profile, side).to_string(),
        );
    }

    let full = Mechanism::UniformRandomFull;
    let third = Rational::new(1, 3);
    for agent in scenario.market.agents() {
        let rd = rank_distribution(&full, &scenario.prior, agent)?;
        report.claim(
            format!("{agent} ranks under the uniform perfect matching"),
            padded(vec![third.clone(), third.clone(), third.clone()], 4),
            rd.mass,
        );
    }

    let sweep = ex_post_stable_at(&full, &profile, 6)?;
    report.claim("no coalition blocks the uniform perfect matching", true, sweep.is_stable());
    report.claim("coalitions checked", 63usize, sweep.coalitions_checked);

    let names = |cs: &[Coalition]| cs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
    let four = Coalition::new(["m2", "m3", "w1", "w2"].map(|k| AgentId::parse(k).expect("key")))?;
    report.claim(
        "balanced coalitions containing every member's favourite",
        names(&[four.clone(), Coalition::grand(scenario.market)]),
        names(&candidate_blockers(&profile)),
    );
    report.claim(format!("{four} blocks"), false, ex_post_block(&full, &profile, &four)?.is_some());
    report.claim(
        "grand coalition blocks",
        false,
        ex_post_block(&full, &profile, &Coalition::grand(scenario.market))?.is_some(),
    );

    let cycles = [
        [m(&[(0, 0), (1, 1), (2, 2)]), m(&[(0, 1), (1, 2), (2, 0)]), m(&[(0, 2), (1, 0), (2, 1)])],
        [m(&[(0, 0), (1, 2), (2, 1)]), m(&[(0, 1), (1, 0), (2, 2)]), m(&[(0, 2), (1, 1), (2, 0)])],
    ];
    let slack = grand_coalition_slack(&full, &profile, &cycles)?;
    report.claim("largest strictness slack of a weakly dominating lottery", Rational::zero(), slack.max_slack);
    for (a, b, hi, lo) in slack.gaps {
        report.claim(format!("q{a} - q{b} over weakly dominating lotteries (max, min)"), vec![Rational::zero(), Rational::zero()], vec![hi, lo]);
    }
    report.claim("weight on imperfect matchings", Rational::zero(), slack.imperfect_mass);

    // A lottery in the equal-weights family has uniform marginals, so it only ties.
    let tie = RandomMatching::new(vec![
        (cycles[0][0].clone(), Rational::new(1, 4)),
        (cycles[0][1].clone(), Rational::new(1, 4)),
        (cycles[0][2].clone(), Rational::new(1, 4)),
        (cycles[1][0].clone(), Rational::new(1, 12)),
        (cycles[1][1].clone(), Rational::new(1, 12)),
        (cycles[1][2].clone(), Rational::new(1, 12)),
    ])?;
    let ties = scenario.market.agents().all(|a| tie.rank_masses(&profile, a) == padded(vec![third.clone(); 3], 4));
    report.claim("equal-weight families give uniform ranks", true, ties);
    Ok(())
}
