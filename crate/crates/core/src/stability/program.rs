//! The blocking linear program shared by the ex-post, ex-ante and interim searches.
//!
//! Variables are `q(c, μ′)`: the probability the deviation picks internal
//! matching `μ′` on profile class `c`, where a class collects the profiles
//! on which the members report the same rankings. Every dominance constraint
//! depends only on the members' rankings, so this aggregation loses nothing.
//! Each *group* is a set of profiles over which one member compares rank
//! distributions (ex ante: everything; interim: one of the member's types).
//! For each group and threshold `n`, `D(n) = after(≤ n) − before(≤ n) ≥ 0`,
//! and `Σ_n D(n) ≥ ε`; the program maximizes `ε` and a block exists iff `ε > 0`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::lp::{solve, Constraint, LinearProgram, LpOutcome, Relation};
use crate::market::{enumerate_internal_matchings, AgentId, Matching, Ranking};
use crate::mechanism::RandomMatching;
use crate::rational::Rational;
use crate::stability::search::Audit;
use crate::stability::witness::Coalition;

static STRICTNESS_CHECKS: AtomicU64 = AtomicU64::new(0);

/// Number of blocking solutions whose per-threshold slacks were recomputed and
/// found consistent with the summed strictness constraint.
pub fn strictness_checks() -> u64 {
    STRICTNESS_CHECKS.load(Ordering::SeqCst)
}

/// One member's comparison: over all region profiles, or only those where it has `ty`.
#[derive(Debug, Clone)]
pub(crate) struct Group {
    pub agent: AgentId,
    pub ty: Option<Ranking>,
}

pub(crate) struct Solved {
    pub epsilon: Rational,
    pub rules: BTreeMap<Vec<Ranking>, RandomMatching>,
}

struct Class {
    key: Vec<Ranking>,
    weight: Rational,
    /// Internal matchings with pairwise distinct member rank vectors.
    columns: Vec<(Matching, Vec<usize>)>,
    first_var: usize,
}

fn rank_vector(key: &[Ranking], members: &[AgentId], m: &Matching) -> Vec<usize> {
    key.iter().zip(members).map(|(r, &a)| r.rank_of_partner(m.partner_index(a))).collect()
}

/// Internal matching worst for `members[pos]` under `key`; first in canonical order on ties.
pub(crate) fn worst_for(internal: &[Matching], members: &[AgentId], key: &[Ranking], pos: usize) -> Matching {
    let a = members[pos];
    let mut best: Option<(&Matching, usize)> = None;
    for m in internal {
        let r = key[pos].rank_of_partner(m.partner_index(a));
        if best.map_or(true, |(_, br)| r > br) {
            best = Some((m, r));
        }
    }
    best.expect("the empty matching is always internal").0.clone()
}

/// Builds and solves the blocking program over the support indices in `region`.
/// Returns `None` when no deviation weakly dominates for every group with some strictness.
pub(crate) fn solve_blocking(
    audit: &Audit<'_>,
    coalition: &Coalition,
    region: &[usize],
    groups: &[Group],
    column_cap: usize,
) -> Result<Option<Solved>> {
    let market = audit.prior().market();
    let members = coalition.members();
    let internal = enumerate_internal_matchings(market, members)?;
    let support = audit.prior().support();

    let mut class_index: BTreeMap<Vec<Ranking>, usize> = BTreeMap::new();
    let mut classes: Vec<Class> = Vec::new();
    let domains: Vec<usize> = groups.iter().map(|g| market.domain_size(g.agent.side)).collect();
    let mut before: Vec<Vec<Rational>> = domains.iter().map(|&d| vec![Rational::zero(); d]).collect();
    let mut group_mass = vec![Rational::zero(); groups.len()];
    let positions: Vec<usize> = groups
        .iter()
        .map(|g| coalition.position(g.agent).ok_or_else(|| Error::Internal("group agent outside coalition".into())))
        .collect::<Result<_>>()?;

    for &i in region {
        let (p, w) = &support[i];
        let key = p.restrict(members);
        let c = *class_index.entry(key.clone()).or_insert_with(|| {
            classes.push(Class { key, weight: Rational::zero(), columns: Vec::new(), first_var: 0 });
            classes.len() - 1
        });
        classes[c].weight += w;
        let phi = audit.outcome(i)?;
        for (g, group) in groups.iter().enumerate() {
            if group.ty.as_ref().is_some_and(|t| t != p.ranking(group.agent)) {
                continue;
            }
            group_mass[g] += w;
            let masses = phi.rank_masses(p, group.agent);
            let mut acc = Rational::zero();
            for (n, m) in masses.iter().enumerate() {
                acc += m;
                if !acc.is_zero() {
                    before[g][n] += w * &acc;
                }
            }
        }
    }
    if group_mass.iter().any(Rational::is_zero) {
        return Ok(None);
    }
    // Every coefficient is monotone in each member's rank, so a matching whose rank
    // vector is weakly worse for all members than another's never helps: keep one
    // matching per Pareto-undominated rank vector.
    let mut num_vars = 0;
    for class in &mut classes {
        let mut seen: BTreeMap<Vec<usize>, Matching> = BTreeMap::new();
        for m in &internal {
            seen.entry(rank_vector(&class.key, members, m)).or_insert_with(|| m.clone());
        }
        let vectors: Vec<&Vec<usize>> = seen.keys().collect();
        let dominated = |v: &Vec<usize>| {
            vectors.iter().any(|u| *u != v && u.iter().zip(v.iter()).all(|(a, b)| a <= b))
        };
        class.columns =
            seen.iter().filter(|(v, _)| !dominated(v)).map(|(v, m)| (m.clone(), v.clone())).collect();
        class.columns.sort_by(|a, b| a.0.cmp(&b.0));
        class.first_var = num_vars;
        num_vars += class.columns.len();
    }
    if num_vars > column_cap {
        return Err(Error::Resource { what: "blocking program columns".into(), cap: column_cap });
    }
    let eps = num_vars;
    let mut lp = LinearProgram::new(num_vars + 1);
    lp.set_objective(vec![(eps, Rational::one())])?;

    for class in &classes {
        let terms = (0..class.columns.len()).map(|k| (class.first_var + k, Rational::one())).collect();
        lp.add_constraint(Constraint::new(terms, Relation::Eq, Rational::one()))?;
    }

    // `D(n)` rows per group and threshold n < domain (at n = domain both sides are the group mass).
    let member_of = |g: usize, class: &Class| -> bool {
        groups[g].ty.as_ref().map_or(true, |t| &class.key[positions[g]] == t)
    };
    let mut rows: Vec<Vec<(Vec<(usize, Rational)>, Rational)>> = Vec::with_capacity(groups.len());
    for g in 0..groups.len() {
        let d = domains[g];
        let mut group_rows = Vec::with_capacity(d - 1);
        for n in 1..d {
            let mut terms = Vec::new();
            for class in classes.iter().filter(|c| member_of(g, c)) {
                for (k, (_, ranks)) in class.columns.iter().enumerate() {
                    if ranks[positions[g]] <= n {
                        terms.push((class.first_var + k, class.weight.clone()));
                    }
                }
            }
            group_rows.push((terms, before[g][n - 1].clone()));
        }
        for (terms, rhs) in &group_rows {
            lp.add_constraint(Constraint::new(terms.clone(), Relation::Ge, rhs.clone()))?;
        }
        let mut sum_terms: BTreeMap<usize, Rational> = BTreeMap::new();
        let mut sum_rhs = Rational::zero();
        for (terms, rhs) in &group_rows {
            for (v, c) in terms {
                *sum_terms.entry(*v).or_insert_with(Rational::zero) += c;
            }
            sum_rhs += rhs;
        }
        let mut strict: Vec<(usize, Rational)> = sum_terms.into_iter().collect();
        strict.push((eps, -Rational::one()));
        lp.add_constraint(Constraint::new(strict, Relation::Ge, sum_rhs))?;
        rows.push(group_rows);
    }

    log::debug!(
        "blocking program for {coalition}: {} classes, {num_vars} columns, {} groups",
        classes.len(),
        groups.len()
    );
    let (epsilon, x) = match solve(&lp)? {
        LpOutcome::Infeasible => return Ok(None),
        LpOutcome::Unbounded => return Err(Error::Internal("blocking program is unbounded".into())),
        LpOutcome::Optimal { value, assignment } => (value, assignment),
    };
    if !epsilon.is_positive() {
        return Ok(None);
    }

    // Per-threshold slacks: all non-negative, and at least one positive in every group.
    for group_rows in &rows {
        let slacks: Vec<Rational> = group_rows
            .iter()
            .map(|(terms, rhs)| terms.iter().map(|(v, c)| c * &x[*v]).sum::<Rational>() - rhs)
            .collect();
        if slacks.iter().any(Rational::is_negative) || !slacks.iter().any(Rational::is_positive) {
            return Err(Error::Internal("summed strictness disagrees with per-threshold slacks".into()));
        }
    }
    STRICTNESS_CHECKS.fetch_add(1, Ordering::SeqCst);

    let mut rules = BTreeMap::new();
    for class in classes {
        let outcomes: Vec<(Matching, Rational)> = class
            .columns
            .iter()
            .enumerate()
            .map(|(k, (m, _))| (m.clone(), x[class.first_var + k].clone()))
            .collect();
        rules.insert(class.key, RandomMatching::new(outcomes)?);
    }
    Ok(Some(Solved { epsilon, rules }))
}
