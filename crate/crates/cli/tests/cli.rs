use std::io::Write;
use std::path::PathBuf;

use serde_json::Value;
use tempfile::TempDir;

use matchaudit::stability::{verify_block_witness, verify_interim_witness, BlockWitness, InterimWitness};
use matchaudit::{Mechanism, PreferenceProfile, Prior};
use matchaudit_cli::{run, EXIT_BLOCKED, EXIT_BUDGET, EXIT_INPUT, EXIT_OK};

const EXAMPLE3_PRIOR: &str = r#"{"agents": {
  "m1": [{"ranking": ["w1","w3","w2"], "weight": "3/4"}, {"ranking": ["w2","w1","w3"], "weight": "1/8"}, {"ranking": ["w3","w2","w1"], "weight": "1/8"}],
  "m2": [{"ranking": ["w1","w2"], "weight": "1"}],
  "m3": [{"ranking": ["w3"], "weight": "1"}],
  "w1": [{"ranking": ["m1","m3","m2"], "weight": "3/4"}, {"ranking": ["m2","m1","m3"], "weight": "1/8"}, {"ranking": ["m3","m2","m1"], "weight": "1/8"}],
  "w2": [{"ranking": ["m1","m2"], "weight": "1"}],
  "w3": [{"ranking": ["m3"], "weight": "1"}]
}}"#;

const MUTUAL_FIRSTS: &str = r#"{"m1": ["w1","w2","w3"], "m2": ["w1","w3","w2"], "m3": ["w3","w1","w2"],
 "w1": ["m1","m2","m3"], "w2": ["m1","m3","m2"], "w3": ["m3","m1","m2"]}"#;

struct Files {
    dir: TempDir,
}

impl Files {
    fn new() -> Self {
        Files { dir: tempfile::tempdir().unwrap() }
    }

    fn put(&self, name: &str, text: &str) -> String {
        let path: PathBuf = self.dir.path().join(name);
        std::fs::File::create(&path).unwrap().write_all(text.as_bytes()).unwrap();
        path.to_string_lossy().into_owned()
    }
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("matchaudit").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn reproduce_example3_as_json() {
    let (code, out, _) = call(&["reproduce", "example3", "--p", "1/8", "--json"]);
    assert_eq!(code, EXIT_OK);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["passed"], true);
    assert!(out.contains("\"11/16\"") && out.contains("\"3/16\""));
}

#[test]
fn reproduce_rejects_bad_parameters() {
    assert_eq!(call(&["reproduce", "example3", "--p", "1/4"]).0, EXIT_INPUT);
    assert_eq!(call(&["reproduce", "example3", "--p", "0.1"]).0, EXIT_INPUT);
    assert_eq!(call(&["reproduce", "insurance", "--utilities", "1,1/2"]).0, EXIT_INPUT);
}

#[test]
fn reproduce_insurance_text() {
    let (code, out, _) = call(&["reproduce", "insurance", "--p", "1/2"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("claims hold"));
}

#[test]
fn da_is_interim_pairwise_stable() {
    let files = Files::new();
    let prior = files.put("ex3.json", EXAMPLE3_PRIOR);
    let (code, out, err) = call(&["audit", "--mechanism", "da-men", "--prior", &prior, "--notion", "interim", "--scope", "pairwise"]);
    assert_eq!(code, EXIT_OK, "{out}{err}");
    assert!(out.contains("stable"));
}

#[test]
fn ex_post_pair_witness_reverifies() {
    let files = Files::new();
    let profile = files.put("p.json", MUTUAL_FIRSTS);
    let (code, out, _) = call(&[
        "audit", "--mechanism", "uniform-random-full", "--prior", &profile, "--notion", "ex-post", "--scope", "pairwise", "--json",
    ]);
    assert_eq!(code, EXIT_BLOCKED);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["verdict"], "unstable");
    let profile: PreferenceProfile = serde_json::from_value(report["profile"].clone()).unwrap();
    let witness = BlockWitness::from_json_value(report["witness"].clone()).unwrap();
    assert_eq!(witness.coalition.to_string(), "{m1, w1}");
    verify_block_witness(&Mechanism::UniformRandomFull, &Prior::point_mass(profile), &witness).unwrap();
}

#[test]
fn find_block_by_a_given_pair() {
    let files = Files::new();
    let prior_path = files.put("ex3.json", EXAMPLE3_PRIOR);
    let (code, out, _) = call(&["find-block", "--mechanism", "random-stable", "--prior", &prior_path, "--coalition", "m1,w1", "--json"]);
    assert_eq!(code, EXIT_BLOCKED);
    let report: Value = serde_json::from_str(&out).unwrap();
    let witness = BlockWitness::from_json_value(report["witness"].clone()).unwrap();
    let prior = Prior::from_json_str(EXAMPLE3_PRIOR).unwrap();
    verify_block_witness(&Mechanism::RandomStable, &prior, &witness).unwrap();

    let (code, _, _) = call(&["find-block", "--mechanism", "random-stable", "--prior", &prior_path, "--coalition", "m3,w3"]);
    assert_eq!(code, EXIT_OK);
    let (code, _, err) = call(&["find-block", "--mechanism", "random-stable", "--prior", &prior_path, "--coalition", "m7"]);
    assert_eq!(code, EXIT_INPUT, "{err}");
}

#[test]
fn interim_witness_reverifies() {
    let files = Files::new();
    let profile = files.put("p.json", MUTUAL_FIRSTS);
    let (code, out, _) =
        call(&["audit", "--mechanism", "uniform-random-full", "--prior", &profile, "--notion", "interim", "--format", "json"]);
    assert_eq!(code, EXIT_BLOCKED);
    let report: Value = serde_json::from_str(&out).unwrap();
    let witness = InterimWitness::from_json_value(report["interim_witness"].clone()).unwrap();
    let prior = Prior::point_mass(serde_json::from_str(MUTUAL_FIRSTS).unwrap());
    verify_interim_witness(&Mechanism::UniformRandomFull, &prior, &witness).unwrap();
}

#[test]
fn exhausted_budget_is_inconclusive() {
    let files = Files::new();
    let prior = files.put("ex3.json", EXAMPLE3_PRIOR);
    let (code, out, _) = call(&[
        "audit", "--mechanism", "da-men", "--prior", &prior, "--notion", "interim", "--max-candidate-sets", "0",
    ]);
    assert_eq!(code, EXIT_BUDGET, "{out}");
    assert!(out.contains("inconclusive"));
}

#[test]
fn mechanism_files_are_accepted() {
    let files = Files::new();
    let prior = files.put("ex3.json", EXAMPLE3_PRIOR);
    let mech = files.put("m.json", r#"{"kind": "da-women"}"#);
    let (code, out, _) = call(&["rankdist", "--mechanism", &mech, "--prior", &prior, "--agent", "w1", "--json"]);
    assert_eq!(code, EXIT_OK);
    let dist: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(dist["mass"][0], "11/16");
}

#[test]
fn stable_set_of_a_profile() {
    let files = Files::new();
    let profile = files.put("p.json", MUTUAL_FIRSTS);
    let (code, out, _) = call(&["stable-set", "--profile", &profile]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.trim(), "{m1w1, m2w2, m3w3}");
}

#[test]
fn malformed_json_reports_position() {
    let files = Files::new();
    let bad = files.put("bad.json", "{\n  \"m1\": [\"w1\",\n");
    let (code, _, err) = call(&["stable-set", "--profile", &bad]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("line 3"), "{err}");
    let (code, _, err) = call(&["audit", "--mechanism", &bad, "--prior", &bad]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("line"), "{err}");
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(call(&["audit"]).0, EXIT_INPUT);
    assert_eq!(call(&["audit", "--mechanism", "da-men", "--prior", "x.json", "--notion", "sometimes"]).0, EXIT_INPUT);
    assert_eq!(call(&["frobnicate"]).0, EXIT_INPUT);
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("reproduce"));
}

#[test]
fn output_is_deterministic() {
    let files = Files::new();
    let prior = files.put("ex3.json", EXAMPLE3_PRIOR);
    let args = ["audit", "--mechanism", "random-stable", "--prior", prior.as_str(), "--json"];
    assert_eq!(call(&args), call(&args));
}
