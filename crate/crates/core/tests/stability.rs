use std::collections::BTreeSet;

use matchaudit::market::{AgentId, Market, Matching, PreferenceProfile};
use matchaudit::mechanism::{table_mechanism, Mechanism, RandomMatching};
use matchaudit::prior::{product_prior, AgentTypeDistribution, Prior};
use matchaudit::rational::q;
use matchaudit::stability::dichotomy::{example2_profile, relabelings};
use matchaudit::stability::*;
use matchaudit::Ranking;

fn ex1() -> PreferenceProfile {
    PreferenceProfile::from_lists(
        Market::square(3),
        &["w1,w2,w3", "w1,w3,w2", "w2,w1,w3"],
        &["m3,m2,m1", "m2,m1,m3", "m3,m2,m1"],
    )
    .unwrap()
}

fn coalition(keys: &[&str]) -> Coalition {
    Coalition::new(keys.iter().map(|k| AgentId::parse(k).unwrap())).unwrap()
}

fn example3_prior(p: (i64, i64)) -> Prior {
    let market = Market::square(3);
    let r = |owner: &str, list: &str| {
        let owner = AgentId::parse(owner).unwrap();
        let keys: Vec<String> = list.split(',').map(str::to_string).collect();
        Ranking::from_keys(owner, market, &keys).unwrap()
    };
    let p = q(p.0, p.1);
    let rest = q(1, 1) - q(2, 1) * &p;
    let three = |owner: &str, a: &str, b: &str, c: &str| {
        AgentTypeDistribution::new(
            AgentId::parse(owner).unwrap(),
            vec![(r(owner, a), rest.clone()), (r(owner, b), p.clone()), (r(owner, c), p.clone())],
        )
        .unwrap()
    };
    let one = |owner: &str, list: &str| AgentTypeDistribution::single(r(owner, list));
    product_prior(
        market,
        vec![
            three("m1", "w1,w3,w2", "w2,w1,w3", "w3,w2,w1"),
            one("m2", "w1,w2"),
            one("m3", "w3"),
            three("w1", "m1,m3,m2", "m2,m1,m3", "m3,m2,m1"),
            one("w2", "m1,m2"),
            one("w3", "m3"),
        ],
    )
    .unwrap()
}

#[test]
fn mutual_firsts_block_a_lottery_ex_post() {
    let p = example2_profile();
    let w = ex_post_block(&Mechanism::UniformRandom, &p, &Coalition::pair(0, 0)).unwrap().unwrap();
    let prior = Prior::point_mass(p.clone());
    verify_block_witness(&Mechanism::UniformRandom, &prior, &w).unwrap();
    for ev in &w.per_agent {
        assert_eq!(ev.after.mass[0], q(1, 1));
    }
}

#[test]
fn stable_mechanisms_do_not_block_ex_post() {
    let report = ex_post_stable_at(&Mechanism::RandomStable, &ex1(), 6).unwrap();
    assert!(report.is_stable());
    assert_eq!(report.coalitions_checked, 63);
}

#[test]
fn uniform_full_at_example1() {
    let r = ex_post_stable_at(&Mechanism::UniformRandomFull, &ex1(), 6).unwrap();
    assert!(r.is_stable(), "{:?}", r.witness.map(|w| w.coalition));
    assert!(ex_post_block(&Mechanism::UniformRandomFull, &ex1(), &coalition(&["m2", "m3", "w1", "w2"]))
        .unwrap()
        .is_none());
}

#[test]
fn point_mass_ex_ante_matches_ex_post() {
    let p = example2_profile();
    let prior = Prior::point_mass(p.clone());
    for c in coalitions_up_to(p.market(), 6) {
        let a = ex_post_block(&Mechanism::UniformRandomFull, &p, &c).unwrap();
        let b = ex_ante_block(&Mechanism::UniformRandomFull, &prior, &c).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn example3_pair_blocks_ex_ante() {
    let prior = example3_prior((1, 8));
    let w = ex_ante_block(&Mechanism::RandomStable, &prior, &coalition(&["m1", "w1"])).unwrap().unwrap();
    for ev in &w.per_agent {
        assert_eq!(ev.before.mass, vec![q(11, 16), q(1, 8), q(3, 16), q(0, 1)]);
        assert_eq!(ev.after.mass, vec![q(3, 4), q(1, 8), q(1, 8), q(0, 1)]);
        assert_eq!(ev.verdict.thresholds, vec![1, 2]);
    }
    let together = Matching::from_pairs(Market::square(3), &[(0, 0)]).unwrap();
    for rm in w.deviation.rules().values() {
        assert_eq!(rm, &RandomMatching::point(together.clone()));
    }
    assert!(ex_ante_block(&Mechanism::RandomStable, &prior, &coalition(&["m3", "w3"])).unwrap().is_none());
    let report = ex_ante_pairwise_stable(&Mechanism::RandomStable, &prior).unwrap();
    assert_eq!(report.witness.unwrap().coalition, coalition(&["m1", "w1"]));
}

#[test]
fn example3_is_interim_pairwise_stable_for_da() {
    let prior = example3_prior((1, 8));
    for mech in [Mechanism::da_men(), Mechanism::da_women(), Mechanism::RandomStable] {
        let r = interim_pairwise_stable(&mech, &prior, &SearchOptions::default()).unwrap();
        assert_eq!(r.verdict(), Verdict::Stable, "{}", mech.name());
    }
}

#[test]
fn interim_at_point_mass_reduces_to_ex_post() {
    let p = example2_profile();
    let prior = Prior::point_mass(p.clone());
    let r = interim_pairwise_stable(&Mechanism::UniformRandomFull, &prior, &SearchOptions::default()).unwrap();
    let w = r.witness.unwrap();
    assert_eq!(w.coalition, Coalition::pair(0, 0));
    let ex_post = ex_post_block(&Mechanism::UniformRandomFull, &p, &w.coalition).unwrap().unwrap();
    ex_post_to_interim(&Mechanism::UniformRandomFull, &p, &ex_post).unwrap();
}

#[test]
fn mutual_first_violations() {
    let p = example2_profile();
    let v = mutual_first_violation(&Mechanism::UniformRandomFull, &Prior::point_mass(p.clone())).unwrap().unwrap();
    assert_eq!((v.man, v.woman, v.probability), (AgentId::man(0), AgentId::woman(0), q(1, 3)));
    assert!(mutual_first_violation(&Mechanism::da_men(), &example3_prior((1, 8))).unwrap().is_none());
}

#[test]
fn relabelings_are_distinct() {
    let orbit = relabelings(&example2_profile()).unwrap();
    assert_eq!(orbit.len(), 36);
    assert_eq!(orbit[0], example2_profile());
    assert_eq!(orbit.iter().collect::<BTreeSet<_>>().len(), 36);
}

#[test]
fn dichotomy_pair_cases() {
    match interim_instability_witness(&Mechanism::UniformRandomFull).unwrap() {
        InstabilityWitness::PairExPost { profile, man, woman, .. } => {
            assert_eq!(profile, example2_profile());
            assert_eq!((man, woman), (AgentId::man(0), AgentId::woman(0)));
        }
        other => panic!("expected a pair witness, got {other:?}"),
    }
    // Overriding one relabeling so its mutual firsts are split.
    let orbit = relabelings(&example2_profile()).unwrap();
    let target = orbit[7].clone();
    let split = Matching::from_pairs(Market::square(3), &[]).unwrap();
    let table = table_mechanism(vec![(target.clone(), RandomMatching::point(split))], Mechanism::RandomStable).unwrap();
    match interim_instability_witness(&table).unwrap() {
        InstabilityWitness::PairExPost { profile, .. } => assert_eq!(profile, target),
        other => panic!("expected a pair witness, got {other:?}"),
    }
}

#[test]
fn witness_json_round_trip() {
    let prior = example3_prior((1, 8));
    let w = ex_ante_block(&Mechanism::RandomStable, &prior, &coalition(&["m1", "w1"])).unwrap().unwrap();
    let text = w.to_json_value().to_string();
    let back = BlockWitness::from_json_str(&text).unwrap();
    assert_eq!(back, w);
    verify_block_witness(&Mechanism::RandomStable, &prior, &back).unwrap();
    // A tampered witness is rejected.
    let mut bad = back.clone();
    bad.per_agent[0].after.mass.swap(0, 1);
    assert!(verify_block_witness(&Mechanism::RandomStable, &prior, &bad).is_err());
}

#[test]
fn grand_coalition_witness_for_random_stable() {
    let start = std::time::Instant::now();
    let w = match interim_instability_witness(&Mechanism::RandomStable).unwrap() {
        InstabilityWitness::GrandCoalition(w) => w,
        other => panic!("expected the grand coalition, got {other:?}"),
    };
    eprintln!("grand witness in {:?}", start.elapsed());
    assert_eq!(w.per_type.len(), 36);
    assert!(w.excluded.is_empty());
}
