use std::collections::BTreeSet;

use crate::cases::{padded, CaseReport, Scenario};
use crate::error::Result;
use crate::market::{AgentId, PreferenceProfile};
use crate::mechanism::{example2_deviation, rank_distribution, Mechanism};
use crate::rational::Rational;
use crate::stability::dichotomy::{example2_profile, relabelings};
use crate::stability::{
    ex_post_to_interim, fosd_compare, interim_instability_witness, interim_to_ex_ante, verify_block_witness,
    verify_interim_witness, InstabilityWitness,
};

pub(crate) fn run(scenario: &Scenario, report: &mut CaseReport) -> Result<()> {
    let base = example2_profile();
    let orbit = relabelings(&base)?;
    let distinct: BTreeSet<&PreferenceProfile> = orbit.iter().collect();
    report.claim("distinct relabelings of the base profile", 36usize, distinct.len());
    let on_orbit = scenario.prior.restrict(|p| distinct.contains(p))?;
    let weights: BTreeSet<&Rational> = on_orbit.support().iter().map(|(_, w)| w).collect();
    report.claim(
        "conditional weight of each relabeling",
        Rational::new(1, 36).to_string(),
        weights.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" "),
    );

    let third = Rational::new(1, 3);
    let two_thirds = Rational::new(2, 3);
    let stable_ranks = padded(vec![two_thirds.clone(), Rational::zero(), third.clone()], 4);
    let swapped_ranks = padded(vec![two_thirds.clone(), third.clone(), Rational::zero()], 4);
    let swap = example2_deviation(Mechanism::RandomStable, base.clone())?;
    for agent in scenario.market.agents() {
        let before = rank_distribution(&Mechanism::RandomStable, &on_orbit, agent)?;
        let after = rank_distribution(&swap, &on_orbit, agent)?;
        report.claim(format!("{agent} ranks under random-stable on relabelings"), stable_ranks.clone(), before.mass.clone());
        report.claim(format!("{agent} ranks after swapping on relabelings"), swapped_ranks.clone(), after.mass.clone());
        let v = fosd_compare(&after, &before)?;
        report.claim(format!("{agent} swap versus stable"), "strictly dominates at [2]", format!("{} at {:?}", v.relation, v.thresholds));
    }
    for mech in [Mechanism::da_men(), Mechanism::da_women()] {
        let same = scenario
            .market
            .agents()
            .map(|a| rank_distribution(&mech, &on_orbit, a).map(|d| d.mass == stable_ranks))
            .collect::<Result<Vec<bool>>>()?;
        report.claim(format!("{} agrees with random-stable on relabelings", mech.name()), true, same.iter().all(|&b| b));
    }

    match interim_instability_witness(&Mechanism::RandomStable)? {
        InstabilityWitness::GrandCoalition(w) => {
            report.claim("witness for random-stable", "grand coalition", "grand coalition");
            verify_interim_witness(&Mechanism::RandomStable, &scenario.prior, &w)?;
            report.claim("consenting types", 36usize, w.per_type.len());
            report.claim("non-consenting positive-mass types", 0usize, w.excluded.len());
            let (_, lifted) = interim_to_ex_ante(&Mechanism::RandomStable, &scenario.prior, &w)?;
            report.claim("conditioned on consenting types, blocks ex ante", w.coalition.to_string(), lifted.coalition.to_string());
            report.witness("grand coalition, interim", w.to_json_value());
        }
        other => report.claim("witness for random-stable", "grand coalition", kind(&other)),
    }

    match interim_instability_witness(&Mechanism::UniformRandomFull)? {
        InstabilityWitness::PairExPost { profile, man, woman, witness } => {
            report.claim("witness for uniform-random-full", "pair", "pair");
            report.claim("pair witness profile is the base profile", true, profile == base);
            report.claim("pair", pair(AgentId::man(0), AgentId::woman(0)), pair(man, woman));
            verify_block_witness(&Mechanism::UniformRandomFull, &crate::prior::Prior::point_mass(profile.clone()), &witness)?;
            let interim = ex_post_to_interim(&Mechanism::UniformRandomFull, &profile, &witness)?;
            report.claim("ex-post pair block lifts to the interim", witness.coalition.to_string(), interim.coalition.to_string());
            report.witness("pair, ex post", witness.to_json_value());
        }
        other => report.claim("witness for uniform-random-full", "pair", kind(&other)),
    }
    Ok(())
}

fn pair(m: AgentId, w: AgentId) -> String {
    format!("{m}, {w}")
}

fn kind(w: &InstabilityWitness) -> &'static str {
    match w {
        InstabilityWitness::PairExPost { .. } => "pair",
        InstabilityWitness::GrandCoalition(_) => "grand coalition",
    }
}
