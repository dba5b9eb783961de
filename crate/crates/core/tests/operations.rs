//! Worked examples for each operation. Expected counts are frozen here and
//! re-derived by closed forms or independent enumeration in the same test.

mod common;

use common::*;
use num_bigint::BigUint;
use rand::SeedableRng;
use std::collections::{BTreeSet, HashMap};
use taru::apps::{dnnf, ecsp, nwa};
use taru::cq::{self, brute_cq_count, count_cq, count_ucq, Database, Query};
use taru::encode::{decode_tree, encode_binary, encode_tree, AT};
use taru::fixtures;
use taru::fpras::{fpras_bta, fpras_ta, Engine, TreeOracle};
use taru::nfa::brute::brute_nfa_count;
use taru::nfa::{count_succinct_nfa, parse_explicit_nfa, LabelOracle};
use taru::oracles::{brute_slice, dp_count_bottom_up_deterministic, dp_count_unambiguous, state_set_count};
use taru::partition::PLabel;
use taru::rng::Seed;
use taru::sampler::{fpaus, sample_language};
use taru::tree::{TextTree, Tree};
use taru::{Config, Draw};

const BUDGET: u64 = 10_000_000;

fn catalan_number(m: u64) -> u64 {
    (0..m).fold(1u64, |c, i| c * 2 * (2 * i + 1) / (i + 2))
}

/// Binary trees with `m` internal nodes where some node has two internal
/// children: all trees minus the `2^(m-1)` caterpillars.
fn double_branch_closed_form(n: usize) -> u64 {
    if n.is_multiple_of(2) {
        return 0;
    }
    let m = (n as u64 - 1) / 2;
    if m == 0 {
        0
    } else {
        catalan_number(m) - (1 << (m - 1))
    }
}

#[test]
fn frozen_slice_counts_match_closed_forms() {
    const CATALAN: [(usize, u64); 4] = [(5, 2), (7, 5), (9, 14), (11, 42)];
    const DOUBLE_BRANCH: [(usize, u64); 7] = [(1, 0), (3, 0), (5, 0), (7, 1), (9, 6), (11, 26), (13, 100)];
    let c = fixtures::catalan();
    for (n, want) in CATALAN {
        assert_eq!(catalan_number((n as u64 - 1) / 2), want);
        assert_eq!(brute_slice(&c, n, BUDGET).unwrap().len() as u64, want);
    }
    let d = fixtures::double_branch();
    for (n, want) in DOUBLE_BRANCH {
        assert_eq!(double_branch_closed_form(n), want);
        assert_eq!(brute_slice(&d, n, BUDGET).unwrap().len() as u64, want);
        assert_eq!(state_set_count(&d, n, BUDGET).unwrap(), BigUint::from(want));
    }
}

#[test]
fn ambiguous_fixture_is_overcounted_by_run_counting() {
    const RUNS_AT_13: u64 = 120;
    let d = fixtures::double_branch();
    let t = fixtures::double_branch_ambiguous();
    assert_eq!(d.count_runs(&t, d.initial), BigUint::from(2u32));
    assert_eq!(dp_count_unambiguous(&d, 13), BigUint::from(RUNS_AT_13));
    assert!(BigUint::from(brute_slice(&d, 13, BUDGET).unwrap().len()) < dp_count_unambiguous(&d, 13));
    assert!(!d.accepts(&fixtures::double_branch_rejected()).unwrap());
}

#[test]
fn deterministic_dp_matches_on_deterministic_fixtures() {
    for a in [fixtures::catalan(), fixtures::chain(), fixtures::two_state_small()] {
        for n in 1..=9 {
            assert_eq!(dp_count_bottom_up_deterministic(&a, n).unwrap(), BigUint::from(brute_slice(&a, n, BUDGET).unwrap().len()));
        }
    }
}

#[test]
fn ternary_tree_encodes_to_size_seven() {
    let a = fixtures::single_ternary();
    assert_eq!(brute_slice(&a, 4, BUDGET).unwrap().len(), 1);
    let b = encode_binary(&a).unwrap();
    let slice = brute_slice(&b, 7, BUDGET).unwrap();
    assert_eq!(slice.len(), 1);
    let at = b.alphabet.get(AT).unwrap();
    let t = TextTree::parse("a(b,c,d)").unwrap().resolve(&b.alphabet).unwrap();
    let e = encode_tree(&t, at);
    assert_eq!(e.size(), 7);
    assert_eq!(slice.trees[0], e);
    assert_eq!(decode_tree(&e, at).unwrap(), t);
}

#[test]
fn double_branch_counts_survive_encoding() {
    let a = fixtures::double_branch();
    let b = encode_binary(&a).unwrap();
    for n in 1..=7 {
        assert_eq!(brute_slice(&a, n, BUDGET).unwrap().len(), brute_slice(&b, 2 * n - 1, BUDGET).unwrap().len());
    }
}

#[test]
fn estimates_on_named_fixtures() {
    let cfg = Config::new(0.2, 0.1, 11);
    let c = fixtures::catalan();
    assert!((fpras_bta(&c, 5, &cfg).unwrap().value - 2.0).abs() <= 0.4);
    assert!((fpras_bta(&c, 9, &cfg).unwrap().value - 14.0).abs() <= 2.8);
    assert_eq!(fpras_bta(&c, 10, &cfg).unwrap().value, 0.0);
    let d = fixtures::double_branch();
    let truth = double_branch_closed_form(13) as f64;
    assert!((fpras_bta(&d, 13, &cfg).unwrap().value - truth).abs() <= 0.2 * truth);
    let m = fixtures::mixed_ternary();
    let truth = brute_slice(&m, 4, BUDGET).unwrap().len() as f64;
    assert!((fpras_ta(&m, 4, &cfg).unwrap().value - truth).abs() <= 0.2 * truth);
}

#[test]
fn tree_oracle_samples_are_near_uniform() {
    let a = fixtures::catalan();
    let e = Engine::run(&a, 7, &Config::new(0.2, 0.1, 3)).unwrap();
    let oracle = TreeOracle { engine: &e, epoch: 8 };
    let state = e.base().initial;
    let label = PLabel::Trees { state: state as u32, size: 7 };
    let mut rng = Seed::from_u64(9).rng();
    let mut counts: HashMap<Tree, usize> = HashMap::new();
    let draws = 4000;
    for _ in 0..draws {
        if let Some(taru::partition::Letter::Tree(t)) = oracle.sample(label, &mut rng) {
            *counts.entry(t.tree.clone()).or_insert(0) += 1;
        }
    }
    let total: usize = counts.values().sum();
    assert_eq!(counts.len(), 5);
    let tv = 0.5 * counts.values().map(|&c| (c as f64 / total as f64 - 0.2).abs()).sum::<f64>();
    assert!(tv <= 0.1, "{tv}");
}

#[test]
fn bottom_rate_at_half_delta() {
    let a = fixtures::double_branch();
    let s = sample_language(&a, 9, &Config::new(0.2, 0.1, 4)).unwrap();
    let bottoms = (0..1000).filter(|&i| fpaus(&s, 0.5, i).unwrap().is_none()).count();
    assert!(bottoms <= 500, "{bottoms}");
    let mut seen = BTreeSet::new();
    for i in 0..200 {
        if let Draw::Sample(t) = s.draw(i).unwrap() {
            assert!(a.accepts(&t).unwrap());
            seen.insert(t);
        }
    }
    assert_eq!(seen.len(), 6);
}

#[test]
fn label_chain_nfa() {
    let v = serde_json::json!({
        "states": ["x0", "x1", "x2"], "initial": "x0", "final": "x2",
        "transitions": [
            {"from": "x0", "to": "x1", "label": ["a", "b"]},
            {"from": "x1", "to": "x2", "label": ["b", "c"]}
        ]
    });
    let (nfa, oracle) = parse_explicit_nfa(&v).unwrap();
    let letters: Vec<[&str; 2]> = vec![["a", "b"], ["a", "c"], ["b", "b"], ["b", "c"]];
    assert_eq!(letters.len(), 4);
    assert_eq!(brute_nfa_count(&nfa, 2, &oracle, BUDGET).unwrap(), BigUint::from(4u32));
    let word = |s: &[&str]| -> Vec<u32> { s.iter().map(|x| oracle.symbols.get(x).unwrap().0).collect() };
    assert!(nfa.word_membership(&oracle, nfa.final_state, &word(&["a", "b"])));
    assert!(!nfa.word_membership(&oracle, nfa.final_state, &word(&["c", "a"])));
    let c = count_succinct_nfa(&nfa, 2, &oracle, &Config::new(0.2, 0.1, 0)).unwrap();
    assert!((c.estimate - 4.0).abs() <= 0.8);
}

#[test]
fn running_example_query() {
    let (q, db) = (cq::fixtures::q1(), cq::fixtures::d1());
    let a = brute_cq_count(&q, &db, BUDGET).unwrap();
    assert_eq!(a.answers, BTreeSet::from([vec!["b".to_string()]]));
    let c = count_cq(&q, &db, None, 1, &Config::new(0.2, 0.1, 5)).unwrap();
    assert!((c.estimate.value - 1.0).abs() <= 0.2);
}

#[test]
fn union_of_sizes_two_and_three() {
    let db = Database::parse("A(1). A(2). B(3). B(4). B(5).").unwrap();
    let qa = Query::parse("Q(x) :- A(x).").unwrap();
    let qb = Query::parse("Q(x) :- B(x).").unwrap();
    assert_eq!(brute_cq_count(&qa, &db, BUDGET).unwrap().count(), 2);
    assert_eq!(brute_cq_count(&qb, &db, BUDGET).unwrap().count(), 3);
    let u = count_ucq(&[(qa, None), (qb, None)], &db, 1, &Config::new(0.2, 0.1, 8)).unwrap();
    assert!((u.value - 5.0).abs() <= 1.0, "{}", u.value);
}

#[test]
fn mux_circuit_has_four_models() {
    let t = dnnf::VTree::from_json(&serde_json::from_str(&std::fs::read_to_string(fixture_path("mux_vtree.json")).unwrap()).unwrap()).unwrap();
    let v = serde_json::from_str(&std::fs::read_to_string(fixture_path("mux_circuit.json")).unwrap()).unwrap();
    let c = dnnf::Circuit::from_json(&v, &t).unwrap();
    let order = c.topological().unwrap();
    let truth = (0..8u32).filter(|m| c.eval(&[m & 1 == 1, m & 2 == 2, m & 4 == 4], &order)).count();
    assert_eq!(truth, 4);
    assert_eq!(dnnf::brute_dnnf_count(&c, &t, BUDGET).unwrap(), 4);
    let d = dnnf::dnnf_to_ta(&c, &t).unwrap();
    assert_eq!(brute_slice(&d.automaton, d.n, BUDGET).unwrap().len(), 4);
}

#[test]
fn ecsp_with_all_outputs_counts_solutions() {
    let mut r = rng(41);
    for _ in 0..10 {
        let mut e = random_ecsp(&mut r);
        e.output = (0..e.variables.len()).collect();
        let nv = e.variables.len() as u32;
        let nd = e.domain.len();
        let solutions = (0..nd.pow(nv))
            .filter(|code| {
                let val: Vec<usize> = (0..nv).map(|i| code / nd.pow(i) % nd).collect();
                e.constraints.iter().all(|c| c.relation.contains(&c.scope.iter().map(|&v| val[v]).collect::<Vec<_>>()))
            })
            .count();
        assert_eq!(ecsp::brute_ecsp_count(&e, BUDGET).unwrap(), solutions);
        let (q, db) = ecsp::ecsp_to_cq(&e).unwrap();
        assert_eq!(brute_cq_count(&q, &db, BUDGET).unwrap().count(), solutions);
    }
}

#[test]
fn nested_word_shape_fixture() {
    let v = serde_json::from_str(&std::fs::read_to_string(fixture_path("single_shape.nwa.json")).unwrap()).unwrap();
    let a = nwa::Nwa::from_json(&v).unwrap();
    assert_eq!(a, nwa::single_shape());
    assert_eq!(nwa::brute_nwa_count(&a, 8, BUDGET).unwrap(), 1);
    let est = nwa::count_nwa(&a, 8, &Config::new(0.2, 0.1, 0)).unwrap();
    assert!((est.value - 1.0).abs() <= 0.2);
}

#[test]
fn internal_only_nwa_counts_like_an_nfa() {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let mut a = random_nwa(&mut r);
        a.call.clear();
        a.ret.clear();
        let words = |n: usize| -> usize {
            let mut cur: Vec<BTreeSet<usize>> = vec![a.initial.iter().copied().collect()];
            for _ in 0..n {
                let mut next = Vec::new();
                for set in &cur {
                    for s in 0..a.alphabet.len() {
                        next.push(a.internal.iter().filter(|t| set.contains(&t.0) && t.1 == s).map(|t| t.2).collect());
                    }
                }
                cur = next;
            }
            cur.iter().filter(|set: &&BTreeSet<usize>| a.accepting.iter().any(|f| set.contains(f))).count()
        };
        for n in 0..=5 {
            assert_eq!(nwa::brute_nwa_count(&a, n, BUDGET).unwrap() as usize, words(n));
        }
    }
}
