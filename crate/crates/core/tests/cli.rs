//! End-to-end runs of the `taru` binary.

mod common;

use common::fixture_path;
use serde_json::Value;
use std::process::{Command, Output};

fn taru(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taru")).args(args).output().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn brute_count_of_catalan_slice() {
    let f = fixture_path("catalan.json");
    let o = taru(&["count", "--automaton", &f, "--n", "9", "--mode", "brute"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["count"], 14);
    assert_eq!(v["certificate"]["mode"], "brute");
    assert!(v["elapsed_ms"].is_number());
}

#[test]
fn even_slice_estimates_zero() {
    let f = fixture_path("catalan.json");
    let o = taru(&["count", "--automaton", &f, "--n", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout_json(&o)["estimate"], 0);
}

#[test]
fn estimate_is_reproducible_per_seed() {
    let f = fixture_path("double_branch.json");
    let run = || stdout_json(&taru(&["count", "--automaton", &f, "--n", "11", "--seed", "7"]))["estimate"].clone();
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert!((a.as_f64().unwrap() - 26.0).abs() <= 0.2 * 26.0);
}

#[test]
fn sampled_trees_come_from_the_language() {
    let f = fixture_path("double_branch.json");
    let o = taru(&["sample", "--automaton", &f, "--n", "9", "--count", "5", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    let a = taru::automaton::TreeAutomaton::from_json(&serde_json::from_str(&std::fs::read_to_string(&f).unwrap()).unwrap()).unwrap();
    assert!(v["certificate"]["caveat"].is_string());
    let samples = v["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 5);
    for s in samples.iter().filter(|s| !s.is_null()) {
        let t = taru::tree::TextTree::parse(s.as_str().unwrap()).unwrap().resolve(&a.alphabet).unwrap();
        assert_eq!(t.size(), 9);
        assert!(a.accepts(&t).unwrap());
    }
}

#[test]
fn query_count_carries_certificate() {
    let (q, d) = (fixture_path("q1.cq"), fixture_path("d1.db"));
    let o = taru(&["cq-count", "--query", &q, "--database", &d, "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["estimate"], 1);
    let cert = &v["certificate"];
    assert_eq!(cert["epsilon"], 0.2);
    assert_eq!(cert["delta"], 0.1);
    assert_eq!(cert["seed"], 1);
    assert_eq!(cert["command"], "cq-count");
    let inputs = cert["inputs"].as_object().unwrap();
    assert_eq!(inputs.len(), 2);
    assert!(inputs.values().all(|h| h.as_str().unwrap().len() == 64));
}

#[test]
fn application_commands_count_fixtures() {
    let cases: Vec<(Vec<String>, f64)> = vec![
        (vec!["dnnf-count".into(), "--circuit".into(), fixture_path("mux_circuit.json"), "--vtree".into(), fixture_path("mux_vtree.json")], 4.0),
        (vec!["nwa-count".into(), "--nwa".into(), fixture_path("single_shape.nwa.json"), "--n".into(), "8".into()], 1.0),
        (vec!["nfa-count".into(), "--nfa".into(), fixture_path("nfa_ab.json"), "--n".into(), "5".into()], 31.0),
    ];
    for (args, truth) in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = taru(&args);
        assert_eq!(o.status.code(), Some(0), "{:?}: {}", args, stderr(&o));
        let est = stdout_json(&o)["estimate"].as_f64().unwrap();
        assert!((est - truth).abs() <= 0.2 * truth, "{:?}: {est}", args);
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(taru(&["count", "--n", "3"]).status.code(), Some(1));
    assert_eq!(taru(&["frobnicate"]).status.code(), Some(1));
    let f = fixture_path("catalan.json");
    assert_eq!(taru(&["count", "--automaton", &f, "--n", "3", "--epsilon", "abc"]).status.code(), Some(1));
    assert_eq!(taru(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_inputs_exit_two() {
    let dir = std::env::temp_dir().join(format!("taru-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\n  \"states\": [\"q\"],\n  oops\n}").unwrap();
    let o = taru(&["count", "--automaton", bad.to_str().unwrap(), "--n", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    let missing = dir.join("missing.json");
    assert_eq!(taru(&["count", "--automaton", missing.to_str().unwrap(), "--n", "3"]).status.code(), Some(2));
    let cq = dir.join("bad.cq");
    std::fs::write(&cq, "Q(x) :- R(x,\n").unwrap();
    let o = taru(&["cq-count", "--query", cq.to_str().unwrap(), "--database", &fixture_path("d1.db")]);
    assert_eq!(o.status.code(), Some(2));
    let f = fixture_path("catalan.json");
    assert_eq!(taru(&["count", "--automaton", &f, "--n", "3", "--epsilon", "1.5"]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn exhausted_budget_exits_three() {
    let f = fixture_path("catalan.json");
    let o = Command::new(env!("CARGO_BIN_EXE_taru"))
        .args(["count", "--automaton", &f, "--n", "41", "--mode", "brute"])
        .env("TARU_BUDGET", "1000")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
