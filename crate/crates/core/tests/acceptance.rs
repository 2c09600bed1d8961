//! Acceptance suite. Runs every criterion in order and prints one line each:
//!
//! ```text
//! criterion N: PASS|FAIL  <detail>  (<seconds>s)
//! ```
//!
//! Criterion 9 fails on a known discrepancy in one claimed closed form; the
//! run treats that exact failure as expected and any other outcome as an error.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use matchaudit::cases::*;
use matchaudit::lp::solve_counters;
use matchaudit::market::{AgentId, Market, Matching, PreferenceProfile, Ranking, Side};
use matchaudit::mechanism::{rank_distribution, stable_set, table_mechanism, Mechanism, RandomMatching};
use matchaudit::prior::{iid_uniform_prior, product_prior, AgentTypeDistribution, Prior};
use matchaudit::rational::{q, Rational};
use matchaudit::stability::dichotomy::{example2_profile, relabelings};
use matchaudit::stability::*;
use matchaudit::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(failures: Vec<String>, ok: impl Into<String>) -> Self {
        if failures.is_empty() {
            Outcome { pass: true, detail: ok.into() }
        } else {
            Outcome { pass: false, detail: failures.join("; ") }
        }
    }
}

fn check(failures: &mut Vec<String>, ok: bool, what: impl FnOnce() -> String) {
    if !ok {
        failures.push(what());
    }
}

fn coalition(keys: &[&str]) -> Coalition {
    Coalition::new(keys.iter().map(|k| AgentId::parse(k).unwrap())).unwrap()
}

fn padded(v: Vec<Rational>) -> Vec<Rational> {
    let mut v = v;
    v.resize(4, Rational::zero());
    v
}

/// Every perfect or partial matching that no man–woman pair or individual blocks, by brute force.
fn brute_stable_set(profile: &PreferenceProfile) -> BTreeSet<Matching> {
    let market = profile.market();
    let mut out = BTreeSet::new();
    let options: Vec<Option<usize>> = std::iter::once(None).chain((0..market.num_women).map(Some)).collect();
    let mut stack = vec![Vec::new()];
    while let Some(partial) = stack.pop() {
        if partial.len() == market.num_men {
            let Ok(m) = Matching::from_men_partners(market, partial) else { continue };
            let ir = market.agents().all(|a| profile.rank_of(a, m.partner(a)).unwrap() <= profile.ranking(a).self_rank());
            let blocked = (0..market.num_men).any(|i| {
                (0..market.num_women).any(|j| {
                    let (man, woman) = (AgentId::man(i), AgentId::woman(j));
                    profile.rank_of(man, woman).unwrap() < profile.rank_of(man, m.partner(man)).unwrap()
                        && profile.rank_of(woman, man).unwrap() < profile.rank_of(woman, m.partner(woman)).unwrap()
                })
            });
            if ir && !blocked {
                out.insert(m);
            }
            continue;
        }
        for o in &options {
            if o.is_some() && partial.contains(o) {
                continue;
            }
            let mut next = partial.clone();
            next.push(*o);
            stack.push(next);
        }
    }
    out
}

fn random_ranking(rng: &mut ChaCha8Rng, market: Market, owner: AgentId, complete: bool) -> Ranking {
    let mut order: Vec<AgentId> = (0..market.side_size(owner.side.opposite()))
        .map(|j| AgentId { side: owner.side.opposite(), index: j })
        .collect();
    order.shuffle(rng);
    if complete {
        order.push(owner);
    } else {
        order.insert(rng.gen_range(0..=order.len()), owner);
    }
    Ranking::from_order(owner, market, &order).unwrap()
}

fn random_profile(rng: &mut ChaCha8Rng, market: Market) -> PreferenceProfile {
    let rankings = market.agents().map(|a| random_ranking(rng, market, a, true)).collect();
    PreferenceProfile::new(market, rankings).unwrap()
}

/// Positive rational weights summing to one.
fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    let raw: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=12)).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|w| q(w, total)).collect()
}

fn criterion_1() -> Result<Outcome> {
    let mut f = Vec::new();
    let profile = example1_profile();
    let market = profile.market();
    let stable: BTreeSet<Matching> = stable_set(&profile)?.into_iter().collect();
    let expected: BTreeSet<Matching> = [Matching::from_pairs(market, &[(0, 1), (1, 2), (2, 0)])?].into();
    check(&mut f, stable == expected, || format!("stable set {stable:?}"));
    check(&mut f, brute_stable_set(&profile) == expected, || "brute-force stable set differs".into());

    let sweep = ex_post_stable_at(&Mechanism::UniformRandomFull, &profile, 6)?;
    check(&mut f, sweep.is_stable() && sweep.coalitions_checked == 63, || {
        format!("sweep verdict {:?} after {} coalitions", sweep.verdict(), sweep.coalitions_checked)
    });
    let four = ex_post_block(&Mechanism::UniformRandomFull, &profile, &coalition(&["m2", "m3", "w1", "w2"]))?;
    check(&mut f, four.is_none(), || "{m2, m3, w1, w2} blocks".into());

    let report = run_case(&CaseId::Example1)?;
    for c in report.failures() {
        f.push(format!("{}: expected {}, computed {}", c.description, c.expected, c.computed));
    }
    let slack_claims = report.claims.iter().filter(|c| c.description.contains("slack")).count();
    check(&mut f, slack_claims > 0, || "no slack claims reported".into());
    Ok(Outcome::new(f, format!("unique stable matching, 63 coalitions, max slack 0 ({} claims)", report.claims.len())))
}

struct Witnesses {
    grand: Option<InterimWitness>,
    pair: Option<(PreferenceProfile, BlockWitness)>,
    example3: Vec<(Prior, BlockWitness)>,
}

fn criterion_2(keep: &mut Witnesses) -> Result<Outcome> {
    let mut f = Vec::new();
    let market = Market::square(3);
    let prior = iid_uniform_prior(market)?;
    let base = example2_profile();
    let orbit: BTreeSet<PreferenceProfile> = relabelings(&base)?.into_iter().collect();
    check(&mut f, orbit.len() == 36, || format!("{} relabelings", orbit.len()));
    let on_orbit = prior.restrict(|p| orbit.contains(p))?;

    match interim_instability_witness(&Mechanism::RandomStable)? {
        InstabilityWitness::GrandCoalition(w) => {
            verify_interim_witness(&Mechanism::RandomStable, &prior, &w)?;
            check(&mut f, w.coalition.is_grand(market), || "witness coalition is not the grand coalition".into());
            check(&mut f, w.per_type.len() == 36 && w.excluded.is_empty(), || {
                format!("{} consenting, {} excluded types", w.per_type.len(), w.excluded.len())
            });
            let restricted = w.deviation.restricted_to().cloned().unwrap_or_default();
            check(&mut f, restricted == orbit, || "deviation is not restricted to the 36 relabelings".into());
            check(&mut f, w.deviation.fallback() == Fallback::Mimic, || "deviation does not mimic elsewhere".into());
            let swap = matchaudit::mechanism::example2_deviation(Mechanism::RandomStable, base.clone())?;
            for agent in market.agents() {
                let before = rank_distribution(&Mechanism::RandomStable, &on_orbit, agent)?;
                let after = rank_distribution(&swap, &on_orbit, agent)?;
                check(&mut f, before.mass == padded(vec![q(2, 3), q(0, 1), q(1, 3)]), || {
                    format!("{agent} stable ranks {:?}", before.mass)
                });
                check(&mut f, after.mass == padded(vec![q(2, 3), q(1, 3), q(0, 1)]), || {
                    format!("{agent} swapped ranks {:?}", after.mass)
                });
            }
            keep.grand = Some(*w);
        }
        InstabilityWitness::PairExPost { man, woman, .. } => {
            f.push(format!("random-stable gave a pair witness ({man}, {woman})"));
        }
    }
    match interim_instability_witness(&Mechanism::UniformRandomFull)? {
        InstabilityWitness::PairExPost { profile, man, woman, witness } => {
            verify_block_witness(&Mechanism::UniformRandomFull, &Prior::point_mass(profile.clone()), &witness)?;
            check(&mut f, (man, woman) == (AgentId::man(0), AgentId::woman(0)), || format!("pair ({man}, {woman})"));
            keep.pair = Some((profile, witness));
        }
        InstabilityWitness::GrandCoalition(_) => f.push("uniform-random-full gave a grand-coalition witness".into()),
    }
    Ok(Outcome::new(f, "grand coalition for random-stable (2/3, 0, 1/3) -> (2/3, 1/3, 0); pair (m1, w1) for uniform-random-full"))
}

fn criterion_3(keep: &mut Witnesses) -> Result<Outcome> {
    let mut f = Vec::new();
    for p in [q(1, 10), q(1, 8), q(1, 5)] {
        let prior = example3_prior(&p)?;
        let report = ex_ante_pairwise_stable(&Mechanism::RandomStable, &prior)?;
        let Some(w) = report.witness else {
            f.push(format!("p = {p}: no pairwise block"));
            continue;
        };
        verify_block_witness(&Mechanism::RandomStable, &prior, &w)?;
        check(&mut f, w.coalition == coalition(&["m1", "w1"]), || format!("p = {p}: coalition {}", w.coalition));
        let p2 = &p * &p;
        let before = padded(vec![Rational::one() - q(3, 1) * &p + q(4, 1) * &p2, p.clone(), q(2, 1) * &p - q(4, 1) * &p2]);
        let after = padded(vec![Rational::one() - q(2, 1) * &p, p.clone(), p.clone()]);
        for ev in &w.per_agent {
            check(&mut f, ev.before.mass == before && ev.after.mass == after, || {
                format!("p = {p}: {} {:?} -> {:?}", ev.agent, ev.before.mass, ev.after.mass)
            });
        }
        for mech in [Mechanism::RandomStable, Mechanism::da_men(), Mechanism::da_women()] {
            let mut held = 0;
            for (profile, _) in prior.support() {
                held += usize::from(forced_matches_hold(&mech.evaluate(profile)?, profile));
            }
            check(&mut f, held == 9 && prior.len() == 9, || format!("p = {p}: {} forced matches on {held}/9", mech.name()));
        }
        keep.example3.push((prior, w));
    }
    Ok(Outcome::new(f, "{m1, w1} blocks ex ante at p = 1/10, 1/8, 1/5; forced matches on 9/9 profiles"))
}

fn criterion_4() -> Result<Outcome> {
    let market = Market::square(3);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let profiles: Vec<PreferenceProfile> = (0..200).map(|_| random_profile(&mut rng, market)).collect();
    let mixes: Vec<(PreferenceProfile, RandomMatching)> = profiles[..50]
        .iter()
        .map(|p| {
            let stable = stable_set(p)?;
            let weights = random_weights(&mut rng, stable.len());
            Ok((p.clone(), RandomMatching::new(stable.into_iter().zip(weights).collect())?))
        })
        .collect::<Result<_>>()?;

    let mut f: Vec<String> = profiles
        .par_iter()
        .enumerate()
        .map(|(i, p)| -> Result<Option<String>> {
            let found: BTreeSet<Matching> = stable_set(p)?.into_iter().collect();
            if found != brute_stable_set(p) {
                return Ok(Some(format!("profile {i}: stable set disagrees with brute force")));
            }
            let r = ex_post_stable_at(&Mechanism::RandomStable, p, 6)?;
            Ok((!r.is_stable()).then(|| format!("profile {i}: random-stable blocked by {:?}", r.witness.map(|w| w.coalition))))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mixed: Vec<String> = mixes
        .par_iter()
        .enumerate()
        .map(|(i, (p, rm))| -> Result<Option<String>> {
            let mech = table_mechanism(vec![(p.clone(), rm.clone())], Mechanism::RandomStable)?;
            let r = ex_post_stable_at(&mech, p, 6)?;
            Ok((!r.is_stable()).then(|| format!("mix {i}: blocked by {:?}", r.witness.map(|w| w.coalition))))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    f.extend(mixed);
    Ok(Outcome::new(f, "random-stable on 200 profiles and stable mixtures on 50, all coalitions up to 6"))
}

fn random_product_prior(rng: &mut ChaCha8Rng, market: Market) -> Prior {
    let per_agent = market
        .agents()
        .map(|a| {
            let n = rng.gen_range(1..=3);
            let mut types: Vec<Ranking> = Vec::new();
            while types.len() < n {
                let complete = rng.gen_bool(0.5);
                let r = random_ranking(rng, market, a, complete);
                if !types.contains(&r) {
                    types.push(r);
                }
            }
            let weights = random_weights(rng, n);
            AgentTypeDistribution::new(a, types.into_iter().zip(weights).collect()).unwrap()
        })
        .collect();
    product_prior(market, per_agent).unwrap()
}

fn criterion_5() -> Result<Outcome> {
    let market = Market::square(3);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let priors: Vec<Prior> = (0..100).map(|_| random_product_prior(&mut rng, market)).collect();
    let largest = priors.iter().map(Prior::len).max().unwrap_or(0);
    let f: Vec<String> = priors
        .par_iter()
        .enumerate()
        .map(|(i, prior)| -> Result<Vec<String>> {
            let mut out = Vec::new();
            for mech in [Mechanism::da_men(), Mechanism::RandomStable] {
                let r = interim_pairwise_stable(&mech, prior, &SearchOptions::default())?;
                if r.verdict() != Verdict::Stable || !r.exhaustive {
                    let who = r.witness.as_ref().map(|w| w.coalition.to_string());
                    out.push(format!("prior {i}: {} {:?} {who:?}", mech.name(), r.verdict()));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(Outcome::new(f, format!("100 product priors (up to {largest} profiles), exhaustive, da-men and random-stable")))
}

fn criterion_6(keep: &Witnesses) -> Result<Outcome> {
    let mut f = Vec::new();
    let market = Market::square(3);
    match &keep.grand {
        Some(w) => {
            let prior = iid_uniform_prior(market)?;
            let (conditioned, lifted) = interim_to_ex_ante(&Mechanism::RandomStable, &prior, w)?;
            verify_block_witness(&Mechanism::RandomStable, &conditioned, &lifted)?;
            check(&mut f, lifted.coalition == w.coalition, || "conditioned witness changed coalition".into());
        }
        None => f.push("no interim witness from criterion 2".into()),
    }
    match &keep.pair {
        Some((profile, w)) => {
            let interim = ex_post_to_interim(&Mechanism::UniformRandomFull, profile, w)?;
            verify_interim_witness(&Mechanism::UniformRandomFull, &Prior::point_mass(profile.clone()), &interim)?;
            check(&mut f, interim.coalition == w.coalition, || "lifted witness changed coalition".into());
        }
        None => f.push("no ex-post witness from criterion 2".into()),
    }
    // Ex-ante witnesses are reverified under their prior; at any single support
    // profile the same deviation need not block, so there is no ex-post lift to check.
    for (prior, w) in &keep.example3 {
        verify_block_witness(&Mechanism::RandomStable, prior, w)?;
    }
    check(&mut f, keep.example3.len() == 3, || format!("{} ex-ante witnesses from criterion 3", keep.example3.len()));
    Ok(Outcome::new(f, "interim -> ex ante under the conditioned prior; ex post -> interim at the point mass"))
}

fn criterion_7() -> Result<Outcome> {
    let mut f = Vec::new();
    let v = mutual_first_violation(&Mechanism::UniformRandomFull, &Prior::point_mass(example2_profile()))?;
    match v {
        Some(v) => check(&mut f, (v.man, v.woman, v.probability.clone()) == (AgentId::man(0), AgentId::woman(0), q(1, 3)), || {
            format!("violation ({}, {}) with probability {}", v.man, v.woman, v.probability)
        }),
        None => f.push("no violation for uniform-random-full".into()),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut with_pairs = 0;
    for i in 0..100 {
        let p = random_profile(&mut rng, Market::square(3));
        with_pairs += usize::from(!matchaudit::stability::dichotomy::mutual_first_pairs(&p).is_empty());
        if let Some(v) = mutual_first_violation(&Mechanism::RandomStable, &Prior::point_mass(p))? {
            f.push(format!("profile {i}: random-stable leaves ({}, {}) apart", v.man, v.woman));
        }
    }
    check(&mut f, with_pairs > 0, || "no random profile had a mutual-first pair".into());
    Ok(Outcome::new(f, format!("(m1, w1) matched with probability 1/3; none for random-stable ({with_pairs}/100 with mutual firsts)")))
}

fn criterion_8() -> Result<Outcome> {
    let mut f = Vec::new();
    let utilities = [q(1, 1), q(3, 4), q(0, 1)];
    for p in [q(1, 4), q(1, 2)] {
        let c = insurance_check(&p, &utilities)?;
        let edge = &p * (Rational::one() - &p);
        let expected = padded(vec![edge.clone(), (Rational::one() - &p).pow(2) + p.pow(2), edge]);
        check(&mut f, c.stable_set_sizes == [1, 1, 1, 1], || format!("p = {p}: stable set sizes {:?}", c.stable_set_sizes));
        check(&mut f, c.m2.mass == expected && c.w2.mass == expected, || {
            format!("p = {p}: m2 {:?}, w2 {:?}", c.m2.mass, c.w2.mass)
        });
        check(&mut f, c.m2_dominance == Dominance::Incomparable && c.w2_dominance == Dominance::Incomparable, || {
            format!("p = {p}: dominance {:?} / {:?}", c.m2_dominance, c.w2_dominance)
        });
        let report = run_case(&CaseId::insurance(p.clone(), utilities.clone())?)?;
        for c in report.failures() {
            f.push(format!("p = {p}: {}", c.description));
        }
    }
    let c = insurance_check(&q(1, 2), &utilities)?;
    check(&mut f, c.m2_utility == (q(5, 8), q(3, 4)) && c.w2_utility == (q(5, 8), q(3, 4)), || {
        format!("expected utilities {:?} / {:?}", c.m2_utility, c.w2_utility)
    });
    Ok(Outcome::new(f, "(p(1-p), (1-p)^2+p^2, p(1-p)) at p = 1/4, 1/2; pairing preferred 5/8 < 3/4; incomparable under FOSD"))
}

/// Mismatches against the claimed closed forms and inequality. Returns them
/// together with the ones the exact analysis predicts.
fn criterion_9() -> Result<(Outcome, bool)> {
    let mut mismatches = Vec::new();
    let mut predicted = Vec::new();
    for (delta, epsilon) in [(q(1, 5), q(3, 20)), (q(1, 10), q(1, 12))] {
        let (d, e) = (&delta, &epsilon);
        let c = correlated_check(d, e)?;
        check(&mut mismatches, c.support_size == 256, || format!("support {}", c.support_size));
        let eighth = e * q(1, 8);
        let n = |k: i64| Rational::from_integer(k);
        let school_full = padded(vec![q(1, 2), (Rational::one() - d) * q(1, 2), d * q(1, 2)]);
        let student_full = padded(vec![
            q(3, 4) - &eighth * (n(2) - d),
            q(1, 4) - &eighth * (n(2) - n(5) * d + n(3) * d * d),
            Rational::zero() - &eighth * (n(-4) + n(6) * d - n(3) * d * d),
        ]);
        let school_sub = padded(vec![q(1, 2), (Rational::one() - e) * q(1, 2), e * q(1, 2)]);
        let student_sub = padded(vec![q(3, 4), q(1, 4) - d * q(1, 4), d * q(1, 4)]);
        for a in &c.agents {
            let (full, sub) = match a.agent.side {
                Side::Man => (&school_full, &school_sub),
                Side::Woman => (&student_full, &student_sub),
            };
            if &a.full.mass != full {
                mismatches.push(format!("({d}, {e}) {} full {:?} vs claimed {:?}", a.agent, a.full.mass, full));
            }
            if &a.sub.mass != sub {
                mismatches.push(format!("({d}, {e}) {} sub {:?} vs claimed {:?}", a.agent, a.sub.mass, sub));
            }
            if a.agent.side == Side::Man && a.full.mass == school_full_exact(d) && a.full.mass != *full {
                predicted.push(format!("({d}, {e}) {} full {:?} vs claimed {:?}", a.agent, a.full.mass, full));
            }
        }
    }

    let grid = [q(1, 10), q(3, 20), q(1, 5), q(1, 4), q(3, 10)];
    let points: Vec<(Rational, Rational)> =
        grid.iter().flat_map(|d| grid.iter().map(move |e| (d.clone(), e.clone()))).collect();
    let verdicts: Vec<(Rational, Rational, bool, bool, bool)> = points
        .par_iter()
        .map(|(d, e)| {
            let c = correlated_check(d, e)?;
            Ok((d.clone(), e.clone(), c.all_prefer, c.stated_condition, c.exact_condition))
        })
        .collect::<Result<_>>()?;
    let mut agree = 0;
    for (d, e, all, stated, exact) in &verdicts {
        if all == stated {
            agree += 1;
        } else {
            mismatches.push(format!("({d}, {e}) all-four-prefer {all} vs inequality {stated}"));
        }
        // With the exact school distribution the verdict follows the corrected condition.
        if all == exact && all != stated {
            predicted.push(format!("({d}, {e}) all-four-prefer {all} vs inequality {stated}"));
        }
    }
    let only_known = !mismatches.is_empty() && mismatches == predicted;
    let detail = if mismatches.is_empty() {
        "all closed forms and 25/25 verdicts match".to_string()
    } else {
        let forms = mismatches.iter().filter(|m| m.contains("claimed")).count();
        format!(
            "{forms} school full-market forms differ from the claimed (1/2, (1-d)/2, d/2); exact is (1/2, (2-d)/4, d/4); \
             verdict agrees with the claimed inequality at {agree}/25 grid points; other three forms match; first: {}",
            mismatches[0]
        )
    };
    Ok((Outcome { pass: mismatches.is_empty(), detail }, mismatches.is_empty() || only_known))
}

fn criterion_10(before: (u64, u64, u64, u64)) -> Result<Outcome> {
    let mut f = Vec::new();
    let c = solve_counters();
    let (solves, optimal, verified) = (c.solves - before.0, c.optimal - before.1, c.verified - before.2);
    let strict = strictness_checks() - before.3;
    check(&mut f, solves > 0 && optimal > 0, || format!("{solves} solves, {optimal} optima"));
    check(&mut f, optimal == verified, || format!("{verified} of {optimal} optima re-verified"));
    check(&mut f, strict > 0, || "no blocking solution had its slacks recomputed".into());
    Ok(Outcome::new(f, format!("{solves} programs, {optimal} optima, {verified} re-verified; {strict} blocking solutions with per-threshold slacks confirmed")))
}

fn report(n: usize, start: Instant, outcome: Result<Outcome>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(o) => {
            println!("criterion {n}: {}  {}  ({secs:.1}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            o.pass
        }
        Err(e) => {
            println!("criterion {n}: FAIL  error: {e}  ({secs:.1}s)");
            false
        }
    }
}

fn main() -> ExitCode {
    let c = solve_counters();
    let counters = (c.solves, c.optimal, c.verified, strictness_checks());
    let mut keep = Witnesses { grand: None, pair: None, example3: Vec::new() };
    let mut unexpected = Vec::new();

    let t = Instant::now();
    if !report(1, t, criterion_1()) {
        unexpected.push(1);
    }
    let t = Instant::now();
    if !report(2, t, criterion_2(&mut keep)) {
        unexpected.push(2);
    }
    let t = Instant::now();
    if !report(3, t, criterion_3(&mut keep)) {
        unexpected.push(3);
    }
    let t = Instant::now();
    if !report(4, t, criterion_4()) {
        unexpected.push(4);
    }
    let t = Instant::now();
    if !report(5, t, criterion_5()) {
        unexpected.push(5);
    }
    let t = Instant::now();
    if !report(6, t, criterion_6(&keep)) {
        unexpected.push(6);
    }
    let t = Instant::now();
    if !report(7, t, criterion_7()) {
        unexpected.push(7);
    }
    let t = Instant::now();
    if !report(8, t, criterion_8()) {
        unexpected.push(8);
    }
    let t = Instant::now();
    match criterion_9() {
        Ok((outcome, explained)) => {
            report(9, t, Ok(outcome));
            if !explained {
                unexpected.push(9);
            } else {
                println!("criterion 9: failure is exactly the known school full-market discrepancy");
            }
        }
        Err(e) => {
            report(9, t, Err(e));
            unexpected.push(9);
        }
    }
    let t = Instant::now();
    if !report(10, t, criterion_10(counters)) {
        unexpected.push(10);
    }

    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
