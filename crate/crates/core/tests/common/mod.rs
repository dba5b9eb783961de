//! Seeded instance generators shared by the integration tests.

#![allow(dead_code)]

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::collections::BTreeSet;
use taru::apps::dnnf::{Circuit, VTree};
use taru::apps::ecsp::{Constraint, Ecsp};
use taru::apps::nwa::Nwa;
use taru::automaton::{Builder, TreeAutomaton};
use taru::cq::{gyo_join_tree, Database, Decomposition, Query};
use taru::fixtures;
use taru::nfa::{ExplicitOracle, NfaTransition, SuccinctNfa};
use taru::partial::PartialTree;
use taru::tree::Symbol;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every named automaton fixture.
pub fn all_fixtures() -> Vec<(&'static str, TreeAutomaton)> {
    vec![
        ("catalan", fixtures::catalan()),
        ("double_branch", fixtures::double_branch()),
        ("chain", fixtures::chain()),
        ("two_state_small", fixtures::two_state_small()),
        ("some_b_leaf", fixtures::some_b_leaf()),
        ("single_ternary", fixtures::single_ternary()),
        ("mixed_ternary", fixtures::mixed_ternary()),
        ("all_quaternary", fixtures::all_quaternary()),
    ]
}

pub fn fixture_path(name: &str) -> String {
    format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// A query with at most three atoms over relations of arity one or two,
/// and a database over at most four constants. Constants in the body are
/// rare; the head is a random subset of the variables.
pub fn random_cq(r: &mut ChaCha8Rng) -> (Query, Database) {
    let nrel = r.random_range(1..=3);
    let rels: Vec<(String, usize)> = (0..nrel).map(|i| (["R", "S", "T"][i].to_string(), r.random_range(1..=2))).collect();
    let dom = r.random_range(1..=4usize);
    let nvars = r.random_range(1..=4usize);
    let natoms = r.random_range(1..=3usize);
    let mut used = BTreeSet::new();
    let mut body = Vec::new();
    for _ in 0..natoms {
        let (name, arity) = rels.choose(r).unwrap();
        let args: Vec<String> = (0..*arity)
            .map(|_| {
                if r.random_bool(0.1) {
                    format!("{}", r.random_range(0..dom))
                } else {
                    let v = r.random_range(0..nvars);
                    used.insert(v);
                    format!("x{v}")
                }
            })
            .collect();
        body.push(format!("{name}({})", args.join(",")));
    }
    let mut head: Vec<usize> = used.iter().copied().filter(|_| r.random_bool(0.6)).collect();
    head.shuffle(r);
    let head: Vec<String> = head.iter().map(|v| format!("x{v}")).collect();
    let q = Query::parse(&format!("Q({}) :- {}.", head.join(","), body.join(", "))).unwrap();
    let mut text = String::new();
    for (name, arity) in &rels {
        text.push_str(&format!("{name}/{arity}.\n"));
        for _ in 0..r.random_range(0..=5) {
            let t: Vec<String> = (0..*arity).map(|_| format!("{}", r.random_range(0..dom))).collect();
            text.push_str(&format!("{name}({}).\n", t.join(",")));
        }
    }
    (q, Database::parse(&text).unwrap())
}

/// A join tree when the query is acyclic, otherwise the single-bag
/// decomposition, with its width.
pub fn decomposition(q: &Query) -> (Decomposition, usize) {
    match gyo_join_tree(q) {
        Ok(d) => (d, 1),
        Err(_) => {
            let d = Decomposition::single_bag(q);
            let w = d.width();
            (d, w)
        }
    }
}

/// Partial trees reached from `#n` by expanding the minimum hole, for
/// every odd `n` up to `max_n`.
pub fn partial_trees(a: &TreeAutomaton, max_n: usize) -> Vec<PartialTree> {
    let symbols: Vec<Symbol> = a.alphabet.symbols().collect();
    let mut out = Vec::new();
    for n in (1..=max_n).step_by(2) {
        let mut frontier = vec![PartialTree::hole(n)];
        while let Some(t) = frontier.pop() {
            if let Ok(h) = t.min_hole() {
                for (_, ext) in t.immediate_extensions(h, &symbols) {
                    frontier.push(ext);
                }
            }
            out.push(t);
        }
    }
    out
}

/// An explicit-label NFA with at most six states over `{a..h}`.
pub fn random_nfa(r: &mut ChaCha8Rng) -> (SuccinctNfa<usize>, ExplicitOracle) {
    const SIGMA: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];
    let ns = r.random_range(2..=6usize);
    let mut oracle = ExplicitOracle::default();
    for s in SIGMA {
        oracle.symbols.intern(s);
    }
    let mut transitions = Vec::new();
    let m = r.random_range(ns..=3 * ns);
    for _ in 0..m {
        let size = r.random_range(1..=8usize);
        let names: Vec<&str> = SIGMA.choose_multiple(r, size).copied().collect();
        let label = oracle.label(&names);
        transitions.push(NfaTransition { from: r.random_range(0..ns), label, to: r.random_range(0..ns) });
    }
    let states = (0..ns).map(|i| format!("q{i}")).collect();
    let nfa = SuccinctNfa::new(states, 0, r.random_range(0..ns), transitions).unwrap();
    (nfa, oracle)
}

/// A random v-tree over `m` variables and a circuit structured by it.
pub fn random_dnnf(r: &mut ChaCha8Rng, m: usize) -> (Circuit, VTree) {
    fn vtree(r: &mut ChaCha8Rng, vars: &[String]) -> Value {
        if vars.len() == 1 {
            return json!(vars[0]);
        }
        let cut = r.random_range(1..vars.len());
        json!([vtree(r, &vars[..cut]), vtree(r, &vars[cut..])])
    }
    let mut names: Vec<String> = (0..m).map(|i| format!("v{i}")).collect();
    names.shuffle(r);
    let t = VTree::from_json(&vtree(r, &names)).unwrap();
    struct Gen<'a> {
        t: &'a VTree,
        gates: Vec<Value>,
    }
    impl Gen<'_> {
        fn push(&mut self, mut g: Value) -> String {
            let id = format!("g{}", self.gates.len());
            g["id"] = json!(id);
            self.gates.push(g);
            id
        }
        fn gate(&mut self, r: &mut ChaCha8Rng, u: usize, depth: usize) -> String {
            match self.t.children[u] {
                None => {
                    let var = &self.t.vars[self.t.leaf_var[u].unwrap()];
                    if r.random_bool(0.2) {
                        let p = self.push(json!({"type": "lit", "var": var, "sign": true}));
                        let n = self.push(json!({"type": "lit", "var": var, "sign": false}));
                        self.push(json!({"type": "or", "inputs": [p, n]}))
                    } else {
                        self.push(json!({"type": "lit", "var": var, "sign": r.random_bool(0.5)}))
                    }
                }
                Some([a, b]) => {
                    let roll = r.random_range(0..100);
                    if roll < 55 || depth == 0 {
                        let x = self.gate(r, a, depth.saturating_sub(1));
                        let y = self.gate(r, b, depth.saturating_sub(1));
                        self.push(json!({"type": "and", "inputs": [x, y]}))
                    } else if roll < 80 {
                        let k = r.random_range(2..=3);
                        let ins: Vec<String> = (0..k).map(|_| self.gate(r, u, depth - 1)).collect();
                        self.push(json!({"type": "or", "inputs": ins}))
                    } else {
                        let c = if r.random_bool(0.5) { a } else { b };
                        self.gate(r, c, depth - 1)
                    }
                }
            }
        }
    }
    let mut g = Gen { t: &t, gates: Vec::new() };
    let out = g.gate(r, t.root, 3);
    let c = Circuit::from_json(&json!({"gates": g.gates, "output": out}), &t).unwrap();
    (c, t)
}

/// An NWA with at most three states, two symbols and two stack symbols.
pub fn random_nwa(r: &mut ChaCha8Rng) -> Nwa {
    let nq = r.random_range(1..=3usize);
    let ns = r.random_range(1..=2usize);
    let np = r.random_range(1..=2usize);
    let p = r.random_range(0.2..0.6);
    let mut a = Nwa {
        states: (0..nq).map(|i| format!("q{i}")).collect(),
        alphabet: ["a", "b"][..ns].iter().map(|s| s.to_string()).collect(),
        hierarchical: (0..np).map(|i| format!("p{i}")).collect(),
        initial: vec![0],
        accepting: (0..nq).filter(|_| r.random_bool(0.5)).collect(),
        ..Default::default()
    };
    if a.accepting.is_empty() {
        a.accepting.push(r.random_range(0..nq));
    }
    for q in 0..nq {
        for s in 0..ns {
            for q2 in 0..nq {
                if r.random_bool(p) {
                    a.internal.push((q, s, q2));
                }
                for h in 0..np {
                    if r.random_bool(p / 2.0) {
                        a.call.push((q, s, q2, h));
                    }
                    if r.random_bool(p / 2.0) {
                        a.ret.push((q, h, s, q2));
                    }
                }
            }
        }
    }
    a
}

/// An ECSP with two to four variables, domain two or three and up to three
/// constraints of arity one or two.
pub fn random_ecsp(r: &mut ChaCha8Rng) -> Ecsp {
    let nv = r.random_range(2..=4usize);
    let nd = r.random_range(2..=3usize);
    let nc = r.random_range(1..=3usize);
    let vars: Vec<usize> = (0..nv).collect();
    let mut constraints = Vec::new();
    for _ in 0..nc {
        let arity = r.random_range(1..=2usize);
        let scope: Vec<usize> = vars.choose_multiple(r, arity).copied().collect();
        let mut relation = BTreeSet::new();
        let total = nd.pow(arity as u32);
        for code in 0..total {
            if r.random_bool(0.55) {
                relation.insert((0..arity).map(|i| code / nd.pow(i as u32) % nd).collect());
            }
        }
        constraints.push(Constraint { scope, relation });
    }
    let mut output: Vec<usize> = vars.iter().copied().filter(|_| r.random_bool(0.5)).collect();
    output.shuffle(r);
    Ecsp::new(
        (0..nv).map(|i| format!("v{i}")).collect(),
        output,
        (0..nd).map(|i| i.to_string()).collect(),
        constraints,
    )
    .unwrap()
}

/// A binary automaton with no transitions into leaves: every slice is empty.
pub fn no_leaves() -> TreeAutomaton {
    let mut b = Builder::new();
    b.transition("s", "a", &["s", "s"]).transition("t", "a", &[]);
    b.build(2, "s").unwrap()
}
