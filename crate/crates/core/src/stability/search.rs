//! Blocking searches: ex post at a profile, ex ante and interim under a prior.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::OnceLock;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::market::{enumerate_internal_matchings, AgentId, PreferenceProfile, Ranking};
use crate::mechanism::{Mechanism, RandomMatching};
use crate::prior::{marginal_types, Prior};
use crate::rational::Rational;
use crate::stability::checker::{block_evidence, interim_evidence, verify_block_witness, verify_interim_witness};
use crate::stability::program::{solve_blocking, worst_for, Group};
use crate::stability::witness::{
    coalitions_up_to, pairwise_coalitions, BlockWitness, Coalition, Deviation, Fallback, InterimWitness,
};

/// A mechanism paired with a prior, with the mechanism's lotteries memoized per support profile.
pub struct Audit<'a> {
    mechanism: &'a Mechanism,
    prior: &'a Prior,
    outcomes: Vec<OnceLock<RandomMatching>>,
}

impl<'a> Audit<'a> {
    pub fn new(mechanism: &'a Mechanism, prior: &'a Prior) -> Self {
        let outcomes = (0..prior.len()).map(|_| OnceLock::new()).collect();
        Audit { mechanism, prior, outcomes }
    }

    pub fn mechanism(&self) -> &'a Mechanism {
        self.mechanism
    }

    pub fn prior(&self) -> &'a Prior {
        self.prior
    }

    /// The audited lottery at support profile `i`.
    pub fn outcome(&self, i: usize) -> Result<&RandomMatching> {
        if let Some(rm) = self.outcomes[i].get() {
            return Ok(rm);
        }
        let rm = self.mechanism.evaluate(&self.prior.support()[i].0)?;
        let _ = self.outcomes[i].set(rm);
        Ok(self.outcomes[i].get().expect("just set"))
    }
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Interim: most type-set families examined per coalition.
    pub max_candidate_sets: usize,
    /// Interim: how many times a family may be grown by types that turn out to consent.
    pub expansion_rounds: usize,
    /// Largest blocking program accepted, in columns.
    pub column_cap: usize,
    /// When set, deviations may differ from the audited mechanism only on these
    /// profiles and reproduce it elsewhere. Outside the set the audited mechanism
    /// must already be internal to the coalition.
    pub restrict_to: Option<BTreeSet<PreferenceProfile>>,
}

pub const DEFAULT_MAX_CANDIDATE_SETS: usize = 4096;
pub const DEFAULT_EXPANSION_ROUNDS: usize = 8;
pub const DEFAULT_COLUMN_CAP: usize = 5000;

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_candidate_sets: DEFAULT_MAX_CANDIDATE_SETS,
            expansion_rounds: DEFAULT_EXPANSION_ROUNDS,
            column_cap: DEFAULT_COLUMN_CAP,
            restrict_to: None,
        }
    }
}

/// Outcome of a sweep over coalitions.
#[derive(Debug, Clone)]
pub struct StabilityReport<W> {
    pub witness: Option<W>,
    pub coalitions_checked: usize,
    pub programs_solved: usize,
    /// False when some search stopped on its budget without a verdict.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
    /// No block found, but some search ran out of budget.
    Inconclusive,
}

impl<W> StabilityReport<W> {
    pub fn verdict(&self) -> Verdict {
        match (&self.witness, self.exhaustive) {
            (Some(_), _) => Verdict::Unstable,
            (None, true) => Verdict::Stable,
            (None, false) => Verdict::Inconclusive,
        }
    }

    pub fn is_stable(&self) -> bool {
        self.verdict() == Verdict::Stable
    }
}

fn check_coalition(audit: &Audit<'_>, coalition: &Coalition) -> Result<()> {
    let market = audit.prior().market();
    for &a in coalition.members() {
        market.check_agent(a)?;
    }
    Ok(())
}

/// Support indices the deviation may change, checking the mimic precondition outside them.
fn deviation_region(audit: &Audit<'_>, coalition: &Coalition, opts: &SearchOptions) -> Result<Vec<usize>> {
    let support = audit.prior().support();
    let Some(set) = &opts.restrict_to else {
        return Ok((0..support.len()).collect());
    };
    let mut region = Vec::new();
    for (i, (p, _)) in support.iter().enumerate() {
        if set.contains(p) {
            region.push(i);
        } else if !coalition.is_grand(audit.prior().market())
            && !audit.outcome(i)?.is_internal_to(coalition.members())
        {
            return Err(Error::Domain(format!(
                "restricted deviations for {coalition} need the audited mechanism to be internal outside the restriction"
            )));
        }
    }
    Ok(region)
}

fn fallback_for(opts: &SearchOptions) -> Fallback {
    if opts.restrict_to.is_some() {
        Fallback::Mimic
    } else {
        Fallback::StaySingle
    }
}

/// Ex-ante block by `coalition` under the audit's prior, using a caller-held audit.
pub fn ex_ante_block_in(audit: &Audit<'_>, coalition: &Coalition, opts: &SearchOptions) -> Result<Option<BlockWitness>> {
    check_coalition(audit, coalition)?;
    let region = deviation_region(audit, coalition, opts)?;
    let groups: Vec<Group> = coalition.members().iter().map(|&agent| Group { agent, ty: None }).collect();
    let Some(solved) = solve_blocking(audit, coalition, &region, &groups, opts.column_cap)? else {
        return Ok(None);
    };
    log::debug!("{coalition} blocks ex ante with slack {}", solved.epsilon);
    let deviation = Deviation::new(
        audit.prior().market(),
        coalition.clone(),
        solved.rules,
        opts.restrict_to.clone(),
        fallback_for(opts),
    )?;
    let per_agent = block_evidence(audit.mechanism(), audit.prior(), &deviation)?;
    let witness = BlockWitness { coalition: coalition.clone(), deviation, per_agent };
    verify_block_witness(audit.mechanism(), audit.prior(), &witness)
        .map_err(|e| Error::Internal(format!("ex-ante witness failed re-verification: {e}")))?;
    Ok(Some(witness))
}

pub fn ex_ante_block(mechanism: &Mechanism, prior: &Prior, coalition: &Coalition) -> Result<Option<BlockWitness>> {
    ex_ante_block_in(&Audit::new(mechanism, prior), coalition, &SearchOptions::default())
}

/// Ex-post block at a single profile: the ex-ante search at the point-mass prior.
pub fn ex_post_block(
    mechanism: &Mechanism,
    profile: &PreferenceProfile,
    coalition: &Coalition,
) -> Result<Option<BlockWitness>> {
    ex_ante_block(mechanism, &Prior::point_mass(profile.clone()), coalition)
}

fn sweep_ex_ante(
    audit: &Audit<'_>,
    coalitions: impl IntoIterator<Item = Coalition>,
    opts: &SearchOptions,
) -> Result<StabilityReport<BlockWitness>> {
    let mut report = StabilityReport { witness: None, coalitions_checked: 0, programs_solved: 0, exhaustive: true };
    for c in coalitions {
        report.coalitions_checked += 1;
        report.programs_solved += 1;
        if let Some(w) = ex_ante_block_in(audit, &c, opts)? {
            report.witness = Some(w);
            break;
        }
    }
    Ok(report)
}

/// Checks every coalition of at most `max_coalition` agents at `profile`, smallest first.
pub fn ex_post_stable_at(
    mechanism: &Mechanism,
    profile: &PreferenceProfile,
    max_coalition: usize,
) -> Result<StabilityReport<BlockWitness>> {
    let prior = Prior::point_mass(profile.clone());
    let audit = Audit::new(mechanism, &prior);
    sweep_ex_ante(&audit, coalitions_up_to(profile.market(), max_coalition), &SearchOptions::default())
}

/// Ex-ante stability against coalitions of at most `max_coalition` agents.
pub fn ex_ante_stable(
    mechanism: &Mechanism,
    prior: &Prior,
    max_coalition: usize,
    opts: &SearchOptions,
) -> Result<StabilityReport<BlockWitness>> {
    let audit = Audit::new(mechanism, prior);
    sweep_ex_ante(&audit, coalitions_up_to(prior.market(), max_coalition), opts)
}

/// Singletons and man–woman pairs only.
pub fn ex_ante_pairwise_stable(mechanism: &Mechanism, prior: &Prior) -> Result<StabilityReport<BlockWitness>> {
    let audit = Audit::new(mechanism, prior);
    sweep_ex_ante(&audit, pairwise_coalitions(prior.market()), &SearchOptions::default())
}

/// Result of one interim search.
#[derive(Debug, Clone)]
pub struct InterimSearch {
    pub witness: Option<InterimWitness>,
    /// True when every type-set family was examined (a `None` is then a proof of no block
    /// within the deviation space searched).
    pub exhaustive: bool,
    pub families_tried: usize,
    pub programs_solved: usize,
}

/// Sizes `k_i ∈ [1, counts_i]` summing to `total`, lexicographically descending.
fn compositions(counts: &[usize], total: usize) -> Vec<Vec<usize>> {
    fn rec(counts: &[usize], i: usize, remaining: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == counts.len() {
            if remaining == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let rest_min = counts.len() - i - 1;
        let rest_max: usize = counts[i + 1..].iter().sum();
        for k in (1..=counts[i].min(remaining)).rev() {
            let r = remaining - k;
            if r < rest_min || r > rest_max {
                continue;
            }
            cur.push(k);
            rec(counts, i + 1, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(counts, 0, total, &mut Vec::new(), &mut out);
    out
}

/// Families of non-empty type-index sets, one per member: larger total size first;
/// within a size, by size vector (descending) and then by the index sets (ascending).
fn families(counts: Vec<usize>) -> impl Iterator<Item = Vec<Vec<usize>>> {
    let total: usize = counts.iter().sum();
    let k = counts.len();
    (k..=total).rev().flat_map(move |s| {
        let counts = counts.clone();
        compositions(&counts, s).into_iter().flat_map(move |comp| {
            let choices: Vec<Vec<Vec<usize>>> =
                comp.iter().zip(&counts).map(|(&size, &n)| (0..n).combinations(size).collect()).collect();
            choices.into_iter().map(|c| c.into_iter()).multi_cartesian_product()
        })
    })
}

/// Interim block by `coalition`, using a caller-held audit.
///
/// Families of consenting type sets are tried in [`families`] order. For each,
/// one program decides whether some deviation makes every consenting type
/// strictly better off conditionally. Profiles with exactly one non-consenting
/// member get the internal matching worst for that member, the choice most
/// likely to keep its excluded type from consenting; if even that type would
/// consent, the family is not self-consistent and is grown by those types.
pub fn interim_block_in(audit: &Audit<'_>, coalition: &Coalition, opts: &SearchOptions) -> Result<InterimSearch> {
    check_coalition(audit, coalition)?;
    let prior = audit.prior();
    let market = prior.market();
    let members = coalition.members();
    let support = prior.support();
    let types: Vec<Vec<Ranking>> = members
        .iter()
        .map(|&a| Ok(marginal_types(prior, a)?.into_iter().map(|(r, _)| r).collect()))
        .collect::<Result<_>>()?;
    let type_index: Vec<Vec<usize>> = support
        .iter()
        .map(|(p, _)| {
            members
                .iter()
                .enumerate()
                .map(|(k, &a)| types[k].binary_search(p.ranking(a)).expect("support types are marginal types"))
                .collect()
        })
        .collect();
    let base_region = deviation_region(audit, coalition, opts)?;
    let internal = enumerate_internal_matchings(market, members)?;

    let mut search = InterimSearch { witness: None, exhaustive: true, families_tried: 0, programs_solved: 0 };
    let mut tried: BTreeSet<Vec<Vec<usize>>> = BTreeSet::new();
    let mut expansions: VecDeque<(Vec<Vec<usize>>, usize)> = VecDeque::new();
    let mut generator = families(types.iter().map(Vec::len).collect());

    loop {
        let (family, round) = match expansions.pop_front() {
            Some(next) => next,
            None => match generator.next() {
                Some(f) if tried.contains(&f) => continue,
                Some(f) => (f, 0),
                None => return Ok(search),
            },
        };
        if tried.len() >= opts.max_candidate_sets {
            search.exhaustive = false;
            return Ok(search);
        }
        tried.insert(family.clone());
        search.families_tried += 1;

        let allowed: Vec<Vec<bool>> = family
            .iter()
            .zip(&types)
            .map(|(set, all)| (0..all.len()).map(|t| set.contains(&t)).collect())
            .collect();
        let dissenters = |i: usize| -> Vec<usize> {
            (0..members.len()).filter(|&k| !allowed[k][type_index[i][k]]).collect()
        };

        // Every consenting type needs positive mass given the others consent.
        let mut mass: Vec<Vec<Rational>> = types.iter().map(|t| vec![Rational::zero(); t.len()]).collect();
        for (i, (_, w)) in support.iter().enumerate() {
            if dissenters(i).is_empty() {
                for k in 0..members.len() {
                    mass[k][type_index[i][k]] += w;
                }
            }
        }
        if family.iter().enumerate().any(|(k, set)| set.iter().any(|&t| mass[k][t].is_zero())) {
            continue;
        }

        let region: Vec<usize> = base_region.iter().copied().filter(|&i| dissenters(i).is_empty()).collect();
        let groups: Vec<Group> = family
            .iter()
            .enumerate()
            .flat_map(|(k, set)| set.iter().map(move |&t| (k, t)))
            .map(|(k, t)| Group { agent: members[k], ty: Some(types[k][t].clone()) })
            .collect();
        search.programs_solved += 1;
        let Some(solved) = solve_blocking(audit, coalition, &region, &groups, opts.column_cap)? else {
            continue;
        };

        let mut rules = solved.rules;
        for &i in &base_region {
            if let [k] = dissenters(i)[..] {
                let key = support[i].0.restrict(members);
                if !rules.contains_key(&key) {
                    let worst = worst_for(&internal, members, &key, k);
                    rules.insert(key, RandomMatching::point(worst));
                }
            }
        }
        let deviation = Deviation::new(market, coalition.clone(), rules, opts.restrict_to.clone(), fallback_for(opts))?;
        let type_sets: BTreeMap<AgentId, BTreeSet<Ranking>> = family
            .iter()
            .enumerate()
            .map(|(k, set)| (members[k], set.iter().map(|&t| types[k][t].clone()).collect()))
            .collect();
        let (per_type, excluded) = interim_evidence(audit.mechanism(), prior, &deviation, &type_sets)?;

        let consenting_outside: Vec<(usize, usize)> = excluded
            .iter()
            .filter(|e| e.verdict.is_strict())
            .map(|e| {
                let k = coalition.position(e.agent).expect("member");
                (k, types[k].binary_search(&e.ranking).expect("marginal type"))
            })
            .collect();
        if !consenting_outside.is_empty() {
            if round < opts.expansion_rounds {
                let mut grown = family.clone();
                for (k, t) in consenting_outside {
                    grown[k].push(t);
                }
                for set in &mut grown {
                    set.sort_unstable();
                    set.dedup();
                }
                if !tried.contains(&grown) {
                    expansions.push_front((grown, round + 1));
                }
            }
            continue;
        }

        log::debug!("{coalition} blocks in the interim with slack {}", solved.epsilon);
        let witness = InterimWitness { coalition: coalition.clone(), type_sets, deviation, per_type, excluded };
        verify_interim_witness(audit.mechanism(), prior, &witness)
            .map_err(|e| Error::Internal(format!("interim witness failed re-verification: {e}")))?;
        search.witness = Some(witness);
        return Ok(search);
    }
}

pub fn interim_block(
    mechanism: &Mechanism,
    prior: &Prior,
    coalition: &Coalition,
    opts: &SearchOptions,
) -> Result<InterimSearch> {
    interim_block_in(&Audit::new(mechanism, prior), coalition, opts)
}

fn sweep_interim(
    audit: &Audit<'_>,
    coalitions: impl IntoIterator<Item = Coalition>,
    opts: &SearchOptions,
) -> Result<StabilityReport<InterimWitness>> {
    let mut report = StabilityReport { witness: None, coalitions_checked: 0, programs_solved: 0, exhaustive: true };
    for c in coalitions {
        let s = interim_block_in(audit, &c, opts)?;
        report.coalitions_checked += 1;
        report.programs_solved += s.programs_solved;
        report.exhaustive &= s.exhaustive;
        if s.witness.is_some() {
            report.witness = s.witness;
            report.exhaustive = true;
            break;
        }
    }
    Ok(report)
}

pub fn interim_pairwise_stable(
    mechanism: &Mechanism,
    prior: &Prior,
    opts: &SearchOptions,
) -> Result<StabilityReport<InterimWitness>> {
    let audit = Audit::new(mechanism, prior);
    sweep_interim(&audit, pairwise_coalitions(prior.market()), opts)
}

/// Interim stability against coalitions of at most `max_coalition` agents.
pub fn interim_stable(
    mechanism: &Mechanism,
    prior: &Prior,
    max_coalition: usize,
    opts: &SearchOptions,
) -> Result<StabilityReport<InterimWitness>> {
    let audit = Audit::new(mechanism, prior);
    sweep_interim(&audit, coalitions_up_to(prior.market(), max_coalition), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compositions_in_order() {
        assert_eq!(compositions(&[2, 2], 3), vec![vec![2, 1], vec![1, 2]]);
        assert_eq!(compositions(&[3], 2), vec![vec![2]]);
        assert!(compositions(&[1, 1], 3).is_empty());
    }

    #[test]
    fn family_enumeration_is_complete_and_ordered() {
        let all: Vec<Vec<Vec<usize>>> = families(vec![3, 2]).collect();
        assert_eq!(all.len(), 7 * 3);
        assert_eq!(all[0], vec![vec![0, 1, 2], vec![0, 1]]);
        let sizes: Vec<usize> = all.iter().map(|f| f.iter().map(Vec::len).sum()).collect();
        assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
        let distinct: BTreeSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), all.len());
    }
}
