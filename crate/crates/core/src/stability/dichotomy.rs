//! Mutual-first checks, the constructive interim-instability witness, and the
//! reductions between the three stability notions.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{all_permutations, permute_profile, AgentId, Market, PreferenceProfile, Side};
use crate::mechanism::{example2_deviation, Mechanism};
use crate::prior::{condition, iid_uniform_prior, marginal_types, Event, Prior};
use crate::rational::Rational;
use crate::stability::checker::{block_evidence, interim_evidence, verify_block_witness, verify_interim_witness};
use crate::stability::search::{ex_post_block, interim_block, SearchOptions};
use crate::stability::witness::{BlockWitness, Coalition, Deviation, Fallback, InterimWitness};

/// A man and woman who rank each other first but are matched with probability below one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MutualFirstViolation {
    pub profile: PreferenceProfile,
    pub man: AgentId,
    pub woman: AgentId,
    pub probability: Rational,
}

/// Pairs `(man, woman)` ranking each other first, by man index.
pub fn mutual_first_pairs(profile: &PreferenceProfile) -> Vec<(AgentId, AgentId)> {
    let market = profile.market();
    (0..market.num_men)
        .filter_map(|i| {
            let m = AgentId::man(i);
            let w = profile.ranking(m).at_rank(1);
            (w.side == Side::Woman && profile.ranking(w).at_rank(1) == m).then_some((m, w))
        })
        .collect()
}

/// First violation over `profiles`, in the order given.
pub fn mutual_first_violation_among<'p>(
    mechanism: &Mechanism,
    profiles: impl IntoIterator<Item = &'p PreferenceProfile>,
) -> Result<Option<MutualFirstViolation>> {
    for p in profiles {
        let pairs = mutual_first_pairs(p);
        if pairs.is_empty() {
            continue;
        }
        let rm = mechanism.evaluate(p)?;
        for (m, w) in pairs {
            let probability = rm.prob_partner(m, w);
            if !probability.is_one() {
                return Ok(Some(MutualFirstViolation { profile: p.clone(), man: m, woman: w, probability }));
            }
        }
    }
    Ok(None)
}

/// First violation over the prior's support in canonical order.
pub fn mutual_first_violation(mechanism: &Mechanism, prior: &Prior) -> Result<Option<MutualFirstViolation>> {
    mutual_first_violation_among(mechanism, prior.support().iter().map(|(p, _)| p))
}

/// The 3×3 profile whose relabelings carry the grand-coalition construction.
pub fn example2_profile() -> PreferenceProfile {
    PreferenceProfile::from_lists(
        Market::square(3),
        &["w1,w2,w3", "w1,w3,w2", "w3,w1,w2"],
        &["m1,m2,m3", "m1,m3,m2", "m3,m1,m2"],
    )
    .expect("valid profile")
}

/// The relabelings of `base`, starting with `base` itself, then by permutation order.
pub fn relabelings(base: &PreferenceProfile) -> Result<Vec<PreferenceProfile>> {
    let mut seen = BTreeSet::new();
    let mut out = vec![base.clone()];
    seen.insert(base.clone());
    for sigma in all_permutations(base.market()) {
        let p = permute_profile(base, &sigma)?;
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub enum InstabilityWitness {
    /// The mechanism is ex-post blockable by a pair at `profile`; the block lifts to every notion.
    PairExPost { profile: PreferenceProfile, man: AgentId, woman: AgentId, witness: BlockWitness },
    /// The grand coalition blocks in the interim under the iid uniform prior.
    GrandCoalition(Box<InterimWitness>),
}

/// Constructs a witness that `mechanism` is not interim stable on the 3×3 market.
///
/// Scans the relabelings of [`example2_profile`] (that profile first) for a
/// mutual-first pair left unmatched with positive probability, then for any
/// pair blocking ex post. If none exists, the mechanism selects the stable
/// matching on every relabeling, and the grand coalition blocks under the iid
/// uniform prior by swapping partners as in [`example2_deviation`] there and
/// reproducing the mechanism elsewhere.
pub fn interim_instability_witness(mechanism: &Mechanism) -> Result<InstabilityWitness> {
    let base = example2_profile();
    let market = base.market();
    let orbit = relabelings(&base)?;

    for p in &orbit {
        let mut candidates: Vec<(AgentId, AgentId)> = Vec::new();
        if let Some(v) = mutual_first_violation_among(mechanism, [p])? {
            candidates.push((v.man, v.woman));
        }
        for m in 0..market.num_men {
            for w in 0..market.num_women {
                candidates.push((AgentId::man(m), AgentId::woman(w)));
            }
        }
        for (man, woman) in candidates {
            let coalition = Coalition::pair(man.index, woman.index);
            if let Some(witness) = ex_post_block(mechanism, p, &coalition)? {
                return Ok(InstabilityWitness::PairExPost { profile: p.clone(), man, woman, witness });
            }
        }
    }

    let prior = iid_uniform_prior(market)?;
    let coalition = Coalition::grand(market);
    let swap = example2_deviation(mechanism.clone(), base)?;
    let rules = orbit
        .iter()
        .map(|p| Ok((p.restrict(coalition.members()), swap.evaluate(p)?)))
        .collect::<Result<_>>()?;
    let restricted: BTreeSet<PreferenceProfile> = orbit.iter().cloned().collect();
    let deviation = Deviation::new(market, coalition.clone(), rules, Some(restricted.clone()), Fallback::Mimic)?;
    let type_sets = coalition
        .members()
        .iter()
        .map(|&a| Ok((a, marginal_types(&prior, a)?.into_iter().map(|(r, _)| r).collect())))
        .collect::<Result<_>>()?;
    let (per_type, excluded) = interim_evidence(mechanism, &prior, &deviation, &type_sets)?;
    let witness = InterimWitness { coalition: coalition.clone(), type_sets, deviation, per_type, excluded };
    verify_interim_witness(mechanism, &prior, &witness)
        .map_err(|e| Error::Internal(format!("grand-coalition witness failed verification: {e}")))?;

    // The search, restricted to the same relabelings, must agree that a block exists.
    let opts = SearchOptions { restrict_to: Some(restricted), ..SearchOptions::default() };
    if interim_block(mechanism, &prior, &coalition, &opts)?.witness.is_none() {
        return Err(Error::Internal("interim search found no block where the construction did".into()));
    }
    Ok(InstabilityWitness::GrandCoalition(Box::new(witness)))
}

/// Conditions the prior on every member holding a consenting type; the interim
/// deviation then blocks ex ante under the conditioned prior.
pub fn interim_to_ex_ante(mechanism: &Mechanism, prior: &Prior, witness: &InterimWitness) -> Result<(Prior, BlockWitness)> {
    let mut event = Event::everything();
    for (&a, set) in &witness.type_sets {
        event = event.and(a, set.iter().cloned())?;
    }
    let conditioned = condition(prior, &event)?;
    let per_agent = block_evidence(mechanism, &conditioned, &witness.deviation)?;
    let lifted = BlockWitness { coalition: witness.coalition.clone(), deviation: witness.deviation.clone(), per_agent };
    verify_block_witness(mechanism, &conditioned, &lifted)?;
    Ok((conditioned, lifted))
}

/// Re-finds an ex-post block as an interim block at the point-mass prior.
pub fn ex_post_to_interim(mechanism: &Mechanism, profile: &PreferenceProfile, witness: &BlockWitness) -> Result<InterimWitness> {
    let prior = Prior::point_mass(profile.clone());
    interim_block(mechanism, &prior, &witness.coalition, &SearchOptions::default())?
        .witness
        .ok_or_else(|| Error::Invalid(format!("{} does not block in the interim at {profile}", witness.coalition)))
}
