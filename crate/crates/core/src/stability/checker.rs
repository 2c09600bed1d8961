//! Witness verification by direct summation over support profiles.
//!
//! Nothing here touches the linear programs that found the witnesses: the
//! checker evaluates both mechanisms profile by profile, rebuilds every rank
//! distribution and re-runs the dominance comparison.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::market::{AgentId, PreferenceProfile, Ranking};
use crate::mechanism::{Mechanism, RandomMatching, RankDistribution};
use crate::prior::Prior;
use crate::rational::Rational;
use crate::stability::fosd::fosd_compare;
use crate::stability::witness::{AgentEvidence, BlockWitness, Deviation, InterimWitness, TypeEvidence};

/// Adds `weight · Pr(rank = k)` for each listed agent, one product per outcome.
fn add_ranks<'a>(
    accs: impl Iterator<Item = (AgentId, &'a mut Vec<Rational>)>,
    weight: &Rational,
    rm: &RandomMatching,
    profile: &PreferenceProfile,
) {
    let products: Vec<Rational> = rm.outcomes().iter().map(|(_, w)| weight * w).collect();
    for (agent, acc) in accs {
        for ((m, _), prod) in rm.outcomes().iter().zip(&products) {
            acc[profile.rank_under(agent, m) - 1] += prod;
        }
    }
}

fn check_internal(deviation: &Deviation, profile: &PreferenceProfile, rm: &RandomMatching) -> Result<()> {
    if rm.is_internal_to(deviation.coalition().members()) {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "deviation is not internal to {} at profile {profile}: {rm}",
            deviation.coalition()
        )))
    }
}

/// Unconditional before/after rank distributions of every member.
pub fn block_evidence(mechanism: &Mechanism, prior: &Prior, deviation: &Deviation) -> Result<Vec<AgentEvidence>> {
    let members = deviation.coalition().members();
    let market = prior.market();
    if deviation.market() != market {
        return Err(Error::Domain("deviation and prior are over different markets".into()));
    }
    let zero = |a: &AgentId| vec![Rational::zero(); market.domain_size(a.side)];
    let mut before: Vec<Vec<Rational>> = members.iter().map(zero).collect();
    let mut after = before.clone();
    for (p, w) in prior.support() {
        let phi = mechanism.evaluate(p)?;
        let dev = deviation.evaluate(p, &phi);
        check_internal(deviation, p, &dev)?;
        add_ranks(members.iter().copied().zip(before.iter_mut()), w, &phi, p);
        add_ranks(members.iter().copied().zip(after.iter_mut()), w, &dev, p);
    }
    members
        .iter()
        .zip(before.into_iter().zip(after))
        .map(|(&a, (b, f))| {
            let before = RankDistribution::new(a, b)?;
            let after = RankDistribution::new(a, f)?;
            let verdict = fosd_compare(&after, &before)?;
            Ok(AgentEvidence { agent: a, before, after, verdict })
        })
        .collect()
}

/// Evidence for every positive-mass type of every member: `(consenting, excluded)`.
///
/// For agent `a` and type `t`, the event is "a has t and every other member
/// has a consenting type"; distributions are conditional on it.
pub fn interim_evidence(
    mechanism: &Mechanism,
    prior: &Prior,
    deviation: &Deviation,
    type_sets: &BTreeMap<AgentId, BTreeSet<Ranking>>,
) -> Result<(Vec<TypeEvidence>, Vec<TypeEvidence>)> {
    let members = deviation.coalition().members();
    let market = prior.market();
    if deviation.market() != market {
        return Err(Error::Domain("deviation and prior are over different markets".into()));
    }
    for &a in members {
        if !type_sets.contains_key(&a) {
            return Err(Error::Invalid(format!("no consenting type set for member {a}")));
        }
    }
    if type_sets.keys().any(|a| !deviation.coalition().contains(*a)) {
        return Err(Error::Invalid("type sets name an agent outside the coalition".into()));
    }
    // Per member: type -> slot in `acc`, which holds (mass, before, after) unnormalized.
    let mut slots: Vec<BTreeMap<Ranking, usize>> = vec![BTreeMap::new(); members.len()];
    let mut acc: Vec<(AgentId, Ranking, Rational, Vec<Rational>, Vec<Rational>)> = Vec::new();
    for (p, w) in prior.support() {
        let dissenters: Vec<usize> =
            (0..members.len()).filter(|&k| !type_sets[&members[k]].contains(p.ranking(members[k]))).collect();
        let relevant: Vec<usize> = match dissenters.len() {
            0 => (0..members.len()).collect(),
            1 => dissenters,
            _ => continue,
        };
        let phi = mechanism.evaluate(p)?;
        let dev = deviation.evaluate(p, &phi);
        check_internal(deviation, p, &dev)?;
        let mut touched = Vec::with_capacity(relevant.len());
        for k in relevant {
            let a = members[k];
            let t = p.ranking(a);
            let slot = match slots[k].get(t) {
                Some(&s) => s,
                None => {
                    let d = market.domain_size(a.side);
                    acc.push((a, t.clone(), Rational::zero(), vec![Rational::zero(); d], vec![Rational::zero(); d]));
                    slots[k].insert(t.clone(), acc.len() - 1);
                    acc.len() - 1
                }
            };
            acc[slot].2 += w;
            touched.push(slot);
        }
        // Split borrows: collect the touched accumulators in member order.
        let mut befores: Vec<(AgentId, &mut Vec<Rational>)> = Vec::new();
        let mut afters: Vec<(AgentId, &mut Vec<Rational>)> = Vec::new();
        for (i, entry) in acc.iter_mut().enumerate() {
            if touched.contains(&i) {
                befores.push((entry.0, &mut entry.3));
                afters.push((entry.0, &mut entry.4));
            }
        }
        add_ranks(befores.into_iter(), w, &phi, p);
        add_ranks(afters.into_iter(), w, &dev, p);
    }
    acc.sort_by(|x, y| (x.0, &x.1).cmp(&(y.0, &y.1)));
    let mut consenting = Vec::new();
    let mut excluded = Vec::new();
    for (a, t, mass, b, f) in acc {
        let before = RankDistribution::from_weights(a, b)?;
        let after = RankDistribution::from_weights(a, f)?;
        let verdict = fosd_compare(&after, &before)?;
        let ev = TypeEvidence { agent: a, ranking: t.clone(), event_mass: mass, before, after, verdict };
        if type_sets[&a].contains(&t) {
            consenting.push(ev);
        } else {
            excluded.push(ev);
        }
    }
    Ok((consenting, excluded))
}

fn mismatch(what: &str) -> Error {
    Error::Invalid(format!("witness check failed: {what}"))
}

/// Re-verifies an ex-ante (or, at a point-mass prior, ex-post) blocking witness.
pub fn verify_block_witness(mechanism: &Mechanism, prior: &Prior, witness: &BlockWitness) -> Result<()> {
    if witness.deviation.coalition() != &witness.coalition {
        return Err(mismatch("deviation belongs to a different coalition"));
    }
    let evidence = block_evidence(mechanism, prior, &witness.deviation)?;
    for ev in &evidence {
        if !ev.verdict.is_strict() {
            return Err(mismatch(&format!("{} does not strictly prefer the deviation ({})", ev.agent, ev.verdict.relation)));
        }
    }
    if evidence != witness.per_agent {
        return Err(mismatch("stored rank distributions differ from recomputed ones"));
    }
    Ok(())
}

/// Re-verifies an interim witness, including that non-consenting types do not consent.
pub fn verify_interim_witness(mechanism: &Mechanism, prior: &Prior, witness: &InterimWitness) -> Result<()> {
    if witness.deviation.coalition() != &witness.coalition {
        return Err(mismatch("deviation belongs to a different coalition"));
    }
    for &a in witness.coalition.members() {
        match witness.type_sets.get(&a) {
            Some(set) if !set.is_empty() => {}
            _ => return Err(mismatch(&format!("{a} has no consenting type"))),
        }
    }
    let (consenting, excluded) = interim_evidence(mechanism, prior, &witness.deviation, &witness.type_sets)?;
    // Every consenting type must carry positive mass and appear in the evidence.
    for (&a, set) in &witness.type_sets {
        for t in set {
            if !consenting.iter().any(|e| e.agent == a && &e.ranking == t) {
                return Err(mismatch(&format!("consenting type of {a} has zero-mass event: {t}")));
            }
        }
    }
    for ev in &consenting {
        if !ev.verdict.is_strict() {
            return Err(mismatch(&format!("{} with type {} does not strictly prefer the deviation", ev.agent, ev.ranking)));
        }
    }
    for ev in &excluded {
        if ev.verdict.is_strict() {
            return Err(mismatch(&format!(
                "{} with non-consenting type {} would strictly prefer the deviation",
                ev.agent, ev.ranking
            )));
        }
    }
    if consenting != witness.per_type || excluded != witness.excluded {
        return Err(mismatch("stored conditional evidence differs from recomputed evidence"));
    }
    Ok(())
}
