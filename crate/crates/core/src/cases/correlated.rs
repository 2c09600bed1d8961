//! Schools (men `m1..m3`, called A, B, C) share one ranking of students
//! (women `w1..w3`, called 1, 2, 3), drawn once per realization.

use std::collections::BTreeMap;

use crate::cases::{padded, ranking, CaseReport, Scenario};
use crate::error::{Error, Result};
use crate::market::{AgentId, Market, Matching, PreferenceProfile, Side};
use crate::mechanism::{rank_distribution, Mechanism, RandomMatching, RankDistribution};
use crate::prior::Prior;
use crate::rational::Rational;
use crate::stability::checker::block_evidence;
use crate::stability::fosd::{fosd_compare, Dominance};
use crate::stability::search::ex_ante_block;
use crate::stability::witness::{BlockWitness, Coalition, Deviation, Fallback};
use crate::stability::verify_block_witness;

/// Which schools and students take part in a serial dictatorship.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Participants {
    pub schools: &'static [usize],
    pub students: &'static [usize],
}

pub const FULL_MARKET: Participants = Participants { schools: &[0, 1, 2], students: &[0, 1, 2] };
/// Schools A, B and students 1, 2.
pub const SUB_MARKET: Participants = Participants { schools: &[0, 1], students: &[0, 1] };

const STUDENT_TYPES: [&str; 4] = ["m1,m2,m3", "m1,m3,m2", "m2,m1,m3", "m2,m3,m1"];
const SCHOOL_ORDERS: [&str; 4] = ["w1,w2,w3", "w1,w3,w2", "w2,w1,w3", "w2,w3,w1"];

/// Students, in the order the first participating school ranks them, each take
/// their favourite acceptable school still free. Non-participants stay single.
pub fn serial_dictatorship(participants: Participants) -> Mechanism {
    let name = if participants == FULL_MARKET {
        "serial-dictatorship".to_string()
    } else {
        let schools: Vec<String> = participants.schools.iter().map(|i| format!("m{}", i + 1)).collect();
        let students: Vec<String> = participants.students.iter().map(|j| format!("w{}", j + 1)).collect();
        format!("serial-dictatorship({}; {})", schools.join(", "), students.join(", "))
    };
    Mechanism::custom(name, move |profile: &PreferenceProfile| {
        let market = profile.market();
        let lead = participants
            .schools
            .first()
            .map(|&i| AgentId::man(i))
            .ok_or_else(|| Error::Invalid("serial dictatorship needs a school".into()))?;
        let mut free: Vec<usize> = participants.schools.to_vec();
        let mut partners = vec![None; market.num_men];
        for student in profile.ranking(lead).order() {
            if student == lead || !participants.students.contains(&student.index) {
                continue;
            }
            let choice = profile
                .ranking(student)
                .order()
                .into_iter()
                .take_while(|&s| s != student)
                .find(|s| free.contains(&s.index));
            if let Some(school) = choice {
                free.retain(|&i| i != school.index);
                partners[school.index] = Some(student.index);
            }
        }
        Ok(RandomMatching::point(Matching::from_men_partners(market, partners)?))
    })
}

fn type_weights(x: &Rational) -> [Rational; 4] {
    let half = Rational::new(1, 2);
    let common = (Rational::one() - x) * &half;
    let odd = x * &half;
    [common.clone(), odd.clone(), common, odd]
}

/// Students draw their rankings independently (weights `(1−δ)/2, δ/2, (1−δ)/2, δ/2`);
/// one common school ranking is drawn with the same weights in `ε`. Zero weights are dropped.
pub fn correlated_prior(delta: &Rational, epsilon: &Rational) -> Result<Prior> {
    let market = Market::square(3);
    let sw = type_weights(delta);
    let cw = type_weights(epsilon);
    let mut support = Vec::new();
    for (c, order) in SCHOOL_ORDERS.iter().enumerate() {
        for s1 in 0..4 {
            for s2 in 0..4 {
                for s3 in 0..4 {
                    let w = &cw[c] * &sw[s1] * &sw[s2] * &sw[s3];
                    if w.is_zero() {
                        continue;
                    }
                    let mut rankings = Vec::with_capacity(6);
                    for school in ["m1", "m2", "m3"] {
                        rankings.push(ranking(market, school, order)?);
                    }
                    for (student, t) in ["w1", "w2", "w3"].into_iter().zip([s1, s2, s3]) {
                        rankings.push(ranking(market, student, STUDENT_TYPES[t])?);
                    }
                    support.push((PreferenceProfile::new(market, rankings)?, w));
                }
            }
        }
    }
    Prior::from_support(market, support)
}

/// One agent of the sub-market: its ranks with everyone versus within the sub-market.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubMarketComparison {
    pub agent: AgentId,
    pub full: RankDistribution,
    pub sub: RankDistribution,
    /// The sub-market compared with the full market.
    pub relation: Dominance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelatedCheck {
    pub support_size: usize,
    pub agents: Vec<SubMarketComparison>,
    /// Every sub-market member strictly prefers clearing separately.
    pub all_prefer: bool,
    /// The claimed sufficient condition `ε < δ < 2ε(1 − 3δ/2 + 3δ²/4)`.
    pub stated_condition: bool,
    /// The condition implied by the exact distributions: schools need `δ > 2ε`,
    /// students need `δ ≤ 2ε(1 − 3δ/2 + 3δ²/4)`. The two never hold together for `δ > 0`.
    pub exact_condition: bool,
}

fn half_open(name: &str, x: &Rational) -> Result<()> {
    if x.is_negative() || x >= &Rational::one() {
        return Err(Error::Domain(format!("{name} = {x} must lie in [0, 1)")));
    }
    Ok(())
}

pub fn sub_market_coalition() -> Coalition {
    Coalition::new([AgentId::man(0), AgentId::man(1), AgentId::woman(0), AgentId::woman(1)]).expect("non-empty")
}

/// Enumerates the joint prior and compares the full and sub-market serial dictatorships.
/// Boundary values `δ = 0` or `ε = 0` are accepted; they drop the zero-weight types.
pub fn correlated_check(delta: &Rational, epsilon: &Rational) -> Result<CorrelatedCheck> {
    half_open("delta", delta)?;
    half_open("epsilon", epsilon)?;
    let prior = correlated_prior(delta, epsilon)?;
    let full = serial_dictatorship(FULL_MARKET);
    let sub = serial_dictatorship(SUB_MARKET);
    let mut agents = Vec::new();
    for &agent in sub_market_coalition().members() {
        let f = rank_distribution(&full, &prior, agent)?;
        let s = rank_distribution(&sub, &prior, agent)?;
        let relation = fosd_compare(&s, &f)?.relation;
        agents.push(SubMarketComparison { agent, full: f, sub: s, relation });
    }
    let all_prefer = agents.iter().all(|a| a.relation == Dominance::StrictlyDominates);
    let bound = student_bound(delta, epsilon);
    Ok(CorrelatedCheck {
        support_size: prior.len(),
        agents,
        all_prefer,
        stated_condition: epsilon < delta && delta < &bound,
        exact_condition: delta > &(Rational::from_integer(2) * epsilon) && delta <= &bound,
    })
}

/// `2ε(1 − 3δ/2 + 3δ²/4)`: the largest `δ` at which the students weakly prefer the sub-market.
fn student_bound(delta: &Rational, epsilon: &Rational) -> Rational {
    Rational::from_integer(2) * epsilon * (Rational::one() - Rational::new(3, 2) * delta + Rational::new(3, 4) * delta * delta)
}

/// A school's ranks with everyone participating: `(1/2, (2 − δ)/4, δ/4)`.
pub fn school_full_exact(delta: &Rational) -> Vec<Rational> {
    let quarter = delta * Rational::new(1, 4);
    padded(vec![Rational::new(1, 2), Rational::new(1, 2) - &quarter, quarter], 4)
}

/// Claimed closed forms for a school and a student, with everyone and within the sub-market.
fn closed_forms(delta: &Rational, epsilon: &Rational) -> [Vec<Rational>; 4] {
    let one = Rational::one();
    let (d, e) = (delta, epsilon);
    let half = Rational::new(1, 2);
    let eighth = e * Rational::new(1, 8);
    let quarter = d * Rational::new(1, 4);
    let n = |k: i64| Rational::from_integer(k);
    let school_full = vec![half.clone(), (&one - d) * &half, d * &half];
    let student_full = vec![
        Rational::new(3, 4) - &eighth * (n(2) - d),
        Rational::new(1, 4) - &eighth * (n(2) - n(5) * d + n(3) * d * d),
        Rational::zero() - &eighth * (n(-4) + n(6) * d - n(3) * d * d),
    ];
    let school_sub = vec![half.clone(), (&one - e) * &half, e * &half];
    let student_sub = vec![Rational::new(3, 4), Rational::new(1, 4) - &quarter, quarter.clone()];
    [school_full, student_full, school_sub, student_sub].map(|v| padded(v, 4))
}

/// The deviation that runs the sub-market serial dictatorship on every support profile.
pub fn sub_market_deviation(prior: &Prior) -> Result<Deviation> {
    let coalition = sub_market_coalition();
    let sub = serial_dictatorship(SUB_MARKET);
    let mut rules = BTreeMap::new();
    for (p, _) in prior.support() {
        rules.insert(p.restrict(coalition.members()), sub.evaluate(p)?);
    }
    Deviation::new(prior.market(), coalition, rules, None, Fallback::StaySingle)
}

pub(crate) fn run(delta: &Rational, epsilon: &Rational, scenario: &Scenario, report: &mut CaseReport) -> Result<()> {
    let check = correlated_check(delta, epsilon)?;
    report.claim("joint support size", 256usize, check.support_size);
    let [school_full, student_full, school_sub, student_sub] = closed_forms(delta, epsilon);
    let school_exact = school_full_exact(delta);
    for a in &check.agents {
        match a.agent.side {
            Side::Man => {
                report.claim(format!("school {} ranks with everyone", a.agent), school_full.clone(), a.full.mass.clone());
                report.claim(format!("school {} ranks with everyone, corrected", a.agent), school_exact.clone(), a.full.mass.clone());
                report.claim(format!("school {} ranks in the sub-market", a.agent), school_sub.clone(), a.sub.mass.clone());
            }
            Side::Woman => {
                report.claim(format!("student {} ranks with everyone", a.agent), student_full.clone(), a.full.mass.clone());
                report.claim(format!("student {} ranks in the sub-market", a.agent), student_sub.clone(), a.sub.mass.clone());
            }
        }
    }
    report.claim("all four strictly prefer the sub-market", check.stated_condition, check.all_prefer);
    report.claim("all four strictly prefer the sub-market, corrected condition", check.exact_condition, check.all_prefer);

    let full = &scenario.mechanisms[0];
    if check.all_prefer {
        let deviation = sub_market_deviation(&scenario.prior)?;
        let per_agent = block_evidence(full, &scenario.prior, &deviation)?;
        let witness = BlockWitness { coalition: deviation.coalition().clone(), deviation, per_agent };
        verify_block_witness(full, &scenario.prior, &witness)?;
        report.witness("sub-market serial dictatorship, ex ante", witness.to_json_value());
    }
    // Any internal deviation of the four, not only the sub-market serial dictatorship.
    let found = ex_ante_block(full, &scenario.prior, &sub_market_coalition())?;
    report.finding(format!("some deviation of {} blocks ex ante", sub_market_coalition()), found.is_some());
    if let Some(w) = found {
        report.witness("best sub-market lottery, ex ante", w.to_json_value());
    }
    Ok(())
}
