//! Tree automata over ranked ordered trees, membership and runs.

use crate::error::{Error, Result};
use crate::tree::{Alphabet, Symbol, Tree};
use fixedbitset::FixedBitSet;
use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde_json::{json, Value};
use std::collections::{BTreeSet, HashMap};

pub type StateSet = FixedBitSet;

/// A transition `(from, symbol, children)`; leaves use an empty child list.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub from: usize,
    pub symbol: Symbol,
    pub children: Vec<usize>,
}

/// A tree automaton `(S, Σ, Δ, s_init)` over trees of arity at most `arity`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeAutomaton {
    pub arity: usize,
    pub alphabet: Alphabet,
    pub states: Vec<String>,
    pub initial: usize,
    pub transitions: Vec<Transition>,
    by_symbol: Vec<Vec<usize>>,
    by_state: Vec<Vec<usize>>,
}

/// A run: the state assigned to each node, listed in preorder with addresses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub assignment: Vec<(Vec<usize>, usize)>,
}

impl TreeAutomaton {
    /// Builds an automaton, validating references and deduplicating
    /// transitions while keeping their first-declaration order.
    pub fn new(
        arity: usize,
        alphabet: Alphabet,
        states: Vec<String>,
        initial: usize,
        transitions: Vec<Transition>,
    ) -> Result<Self> {
        if initial >= states.len() {
            return Err(Error::invalid("initial state is not declared"));
        }
        let mut seen = std::collections::HashSet::new();
        let mut kept = Vec::new();
        for t in transitions {
            if t.from >= states.len() || t.children.iter().any(|&c| c >= states.len()) {
                return Err(Error::invalid("transition references an undeclared state"));
            }
            if t.symbol.0 as usize >= alphabet.len() {
                return Err(Error::invalid("transition references an undeclared symbol"));
            }
            if t.children.len() > arity {
                return Err(Error::invalid(format!(
                    "transition on `{}` has {} children but the arity is {}",
                    alphabet.name(t.symbol),
                    t.children.len(),
                    arity
                )));
            }
            if seen.insert(t.clone()) {
                kept.push(t);
            }
        }
        let mut a = TreeAutomaton {
            arity,
            alphabet,
            states,
            initial,
            transitions: kept,
            by_symbol: Vec::new(),
            by_state: Vec::new(),
        };
        a.reindex();
        Ok(a)
    }

    fn reindex(&mut self) {
        self.by_symbol = vec![Vec::new(); self.alphabet.len()];
        self.by_state = vec![Vec::new(); self.states.len()];
        for (i, t) in self.transitions.iter().enumerate() {
            self.by_symbol[t.symbol.0 as usize].push(i);
            self.by_state[t.from].push(i);
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    /// The size `m = ‖Δ‖`: each transition contributes its source, its
    /// symbol and one token per child.
    pub fn size(&self) -> usize {
        self.transitions.iter().map(|t| 2 + t.children.len()).sum()
    }

    /// True when every transition has zero or two children.
    pub fn is_binary(&self) -> bool {
        self.transitions.iter().all(|t| t.children.is_empty() || t.children.len() == 2)
    }

    pub fn transitions_from(&self, state: usize) -> impl Iterator<Item = &Transition> {
        self.by_state[state].iter().map(move |&i| &self.transitions[i])
    }

    pub fn transitions_on(&self, symbol: Symbol) -> impl Iterator<Item = &Transition> {
        self.by_symbol[symbol.0 as usize].iter().map(move |&i| &self.transitions[i])
    }

    /// Symbols `a` with `(state, a, λ) ∈ Δ`, in declaration order.
    pub fn leaf_symbols(&self, state: usize) -> Vec<Symbol> {
        self.transitions_from(state)
            .filter(|t| t.children.is_empty())
            .map(|t| t.symbol)
            .collect()
    }

    /// The same automaton with a different initial state (`T[s]`).
    pub fn with_initial(&self, state: usize) -> TreeAutomaton {
        let mut a = self.clone();
        a.initial = state;
        a
    }

    /// Folds a set of initial states into a fresh super-initial state that
    /// copies their transitions. A single state is used directly.
    pub fn with_initial_states(&self, initials: &[usize]) -> Result<TreeAutomaton> {
        let uniq: BTreeSet<usize> = initials.iter().copied().collect();
        match uniq.len() {
            0 => {
                // No initial state: the language is empty.
                let mut a = self.clone();
                let top = a.fresh_state_name("init");
                a.states.push(top);
                a.initial = a.states.len() - 1;
                a.reindex();
                Ok(a)
            }
            1 => Ok(self.with_initial(*uniq.iter().next().unwrap())),
            _ => {
                let mut states = self.states.clone();
                let top = self.fresh_state_name("init");
                states.push(top);
                let top_idx = states.len() - 1;
                let mut transitions = self.transitions.clone();
                for &s in &uniq {
                    for t in self.transitions_from(s) {
                        transitions.push(Transition {
                            from: top_idx,
                            symbol: t.symbol,
                            children: t.children.clone(),
                        });
                    }
                }
                TreeAutomaton::new(self.arity, self.alphabet.clone(), states, top_idx, transitions)
            }
        }
    }

    fn fresh_state_name(&self, base: &str) -> String {
        let mut name = format!("⊤{base}");
        while self.state_index(&name).is_some() {
            name.push('\'');
        }
        name
    }

    fn check_tree(&self, tree: &Tree) -> Result<()> {
        if tree.label.0 as usize >= self.alphabet.len() {
            return Err(Error::invalid("tree uses a symbol outside the automaton alphabet"));
        }
        if tree.children.len() > self.arity {
            return Err(Error::invalid(format!(
                "tree node `{}` has {} children but the automaton arity is {}",
                self.alphabet.name(tree.label),
                tree.children.len(),
                self.arity
            )));
        }
        tree.children.iter().try_for_each(|c| self.check_tree(c))
    }

    /// Set of states `q` such that `tree ∈ L(T[q])`, by bottom-up dynamic
    /// programming. Assumes the tree was validated.
    pub fn state_set(&self, tree: &Tree) -> StateSet {
        let child_sets: Vec<StateSet> = tree.children.iter().map(|c| self.state_set(c)).collect();
        self.combine(tree.label, &child_sets)
    }

    /// States reachable at a node labeled `symbol` whose children have the
    /// given state sets.
    pub fn combine(&self, symbol: Symbol, child_sets: &[StateSet]) -> StateSet {
        let mut out = FixedBitSet::with_capacity(self.states.len());
        for t in self.transitions_on(symbol) {
            if t.children.len() == child_sets.len()
                && t.children.iter().zip(child_sets).all(|(&c, set)| set.contains(c))
            {
                out.insert(t.from);
            }
        }
        out
    }

    /// Membership test `tree ∈ L(T)`.
    pub fn accepts(&self, tree: &Tree) -> Result<bool> {
        self.check_tree(tree)?;
        Ok(self.state_set(tree).contains(self.initial))
    }

    /// Membership with a witness run when the tree is accepted.
    pub fn accepting_run(&self, tree: &Tree) -> Result<Option<Run>> {
        self.check_tree(tree)?;
        let sets = SetTree::build(self, tree);
        if !sets.set.contains(self.initial) {
            return Ok(None);
        }
        let mut assignment = Vec::new();
        self.assign(tree, &sets, self.initial, &mut Vec::new(), &mut assignment);
        Ok(Some(Run { assignment }))
    }

    fn assign(
        &self,
        tree: &Tree,
        sets: &SetTree,
        state: usize,
        addr: &mut Vec<usize>,
        out: &mut Vec<(Vec<usize>, usize)>,
    ) {
        out.push((addr.clone(), state));
        let t = self
            .transitions_from(state)
            .find(|t| {
                t.symbol == tree.label
                    && t.children.len() == tree.children.len()
                    && t.children.iter().zip(&sets.children).all(|(&c, s)| s.set.contains(c))
            })
            .expect("state set guarantees a matching transition");
        for (i, (child, &cs)) in tree.children.iter().zip(&t.children).enumerate() {
            addr.push(i + 1);
            self.assign(child, &sets.children[i], cs, addr, out);
            addr.pop();
        }
    }

    /// Checks the run invariant for every node and that the root is initial.
    pub fn is_accepting_run(&self, tree: &Tree, run: &Run) -> bool {
        let map: HashMap<&Vec<usize>, usize> = run.assignment.iter().map(|(a, s)| (a, *s)).collect();
        if map.get(&Vec::new()) != Some(&self.initial) {
            return false;
        }
        tree.addresses().iter().all(|u| {
            let node = tree.subtree(u).unwrap();
            let Some(&s) = map.get(u) else { return false };
            let mut kids = Vec::new();
            for i in 1..=node.children.len() {
                let mut v = u.clone();
                v.push(i);
                match map.get(&v) {
                    Some(&c) => kids.push(c),
                    None => return false,
                }
            }
            self.transitions_from(s)
                .any(|t| t.symbol == node.label && t.children == kids)
        })
    }

    /// Number of distinct runs of `T[state]` over `tree`.
    pub fn count_runs(&self, tree: &Tree, state: usize) -> BigUint {
        let table = self.run_counts(tree);
        table[state].clone()
    }

    fn run_counts(&self, tree: &Tree) -> Vec<BigUint> {
        let kids: Vec<Vec<BigUint>> = tree.children.iter().map(|c| self.run_counts(c)).collect();
        let mut out = vec![BigUint::zero(); self.states.len()];
        for t in self.transitions_on(tree.label) {
            if t.children.len() != kids.len() {
                continue;
            }
            let mut prod = BigUint::one();
            for (&c, k) in t.children.iter().zip(&kids) {
                prod *= &k[c];
                if prod.is_zero() {
                    break;
                }
            }
            out[t.from] += prod;
        }
        out
    }

    /// Parses the JSON automaton format. `initial` may be one state name or
    /// an array of names (folded into a super-initial state).
    pub fn from_json(v: &Value) -> Result<TreeAutomaton> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::invalid("automaton must be a JSON object"))?;
        let arity = obj
            .get("arity")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::invalid("automaton needs an integer `arity`"))? as usize;
        let mut alphabet = Alphabet::new();
        for s in str_array(obj.get("alphabet"), "alphabet")? {
            if alphabet.get(&s).is_some() {
                return Err(Error::invalid(format!("duplicate symbol `{s}`")));
            }
            alphabet.intern(&s);
        }
        let states = str_array(obj.get("states"), "states")?;
        let mut index = HashMap::new();
        for (i, s) in states.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate state `{s}`")));
            }
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::invalid(format!("undeclared state `{name}`")))
        };
        let initials: Vec<usize> = match obj.get("initial") {
            Some(Value::String(s)) => vec![lookup(s)?],
            Some(Value::Array(_)) => str_array(obj.get("initial"), "initial")?
                .iter()
                .map(|s| lookup(s))
                .collect::<Result<_>>()?,
            _ => return Err(Error::invalid("automaton needs `initial`")),
        };
        let mut transitions = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let arr = obj
            .get("transitions")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::invalid("automaton needs a `transitions` array"))?;
        for (i, tv) in arr.iter().enumerate() {
            let from = tv
                .get("from")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::invalid(format!("transition {i}: missing `from`")))?;
            let sym = tv
                .get("symbol")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::invalid(format!("transition {i}: missing `symbol`")))?;
            let symbol = alphabet
                .get(sym)
                .ok_or_else(|| Error::invalid(format!("transition {i}: undeclared symbol `{sym}`")))?;
            let children = str_array(tv.get("children"), "children")?
                .iter()
                .map(|c| lookup(c))
                .collect::<Result<Vec<_>>>()?;
            let t = Transition {
                from: lookup(from)?,
                symbol,
                children,
            };
            if !seen.insert(t.clone()) {
                return Err(Error::invalid(format!("transition {i} is a duplicate")));
            }
            transitions.push(t);
        }
        let a = TreeAutomaton::new(arity, alphabet, states, initials[0], transitions)?;
        a.with_initial_states(&initials)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "arity": self.arity,
            "alphabet": self.alphabet.names(),
            "states": self.states,
            "initial": self.states[self.initial],
            "transitions": self.transitions.iter().map(|t| json!({
                "from": self.states[t.from],
                "symbol": self.alphabet.name(t.symbol),
                "children": t.children.iter().map(|&c| self.states[c].clone()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

fn str_array(v: Option<&Value>, field: &str) -> Result<Vec<String>> {
    match v {
        None => Ok(Vec::new()),
        Some(Value::Array(a)) => a
            .iter()
            .map(|x| {
                x.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Error::invalid(format!("`{field}` must contain strings")))
            })
            .collect(),
        Some(_) => Err(Error::invalid(format!("`{field}` must be an array"))),
    }
}

/// Per-node state sets, shaped like the tree.
struct SetTree {
    set: StateSet,
    children: Vec<SetTree>,
}

impl SetTree {
    fn build(a: &TreeAutomaton, t: &Tree) -> SetTree {
        let children: Vec<SetTree> = t.children.iter().map(|c| SetTree::build(a, c)).collect();
        let sets: Vec<StateSet> = children.iter().map(|c| c.set.clone()).collect();
        SetTree {
            set: a.combine(t.label, &sets),
            children,
        }
    }
}

/// Convenience builder used by fixtures and reductions.
#[derive(Default)]
pub struct Builder {
    alphabet: Alphabet,
    states: Vec<String>,
    index: HashMap<String, usize>,
    transitions: Vec<Transition>,
}

impl Builder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn symbol(&mut self, name: &str) -> Symbol {
        self.alphabet.intern(name)
    }

    pub fn state(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.states.push(name.to_string());
        self.index.insert(name.to_string(), self.states.len() - 1);
        self.states.len() - 1
    }

    pub fn transition(&mut self, from: &str, symbol: &str, children: &[&str]) -> &mut Self {
        let from = self.state(from);
        let symbol = self.symbol(symbol);
        let children = children.iter().map(|c| self.state(c)).collect();
        self.transitions.push(Transition {
            from,
            symbol,
            children,
        });
        self
    }

    pub fn raw_transition(&mut self, from: usize, symbol: Symbol, children: Vec<usize>) -> &mut Self {
        self.transitions.push(Transition {
            from,
            symbol,
            children,
        });
        self
    }

    pub fn build(self, arity: usize, initial: &str) -> Result<TreeAutomaton> {
        let init = *self
            .index
            .get(initial)
            .ok_or_else(|| Error::invalid(format!("undeclared initial state `{initial}`")))?;
        TreeAutomaton::new(arity, self.alphabet, self.states, init, self.transitions)
    }

    pub fn build_multi(self, arity: usize, initials: &[usize]) -> Result<TreeAutomaton> {
        let first = initials.first().copied().unwrap_or(0);
        let mut states = self.states;
        if states.is_empty() {
            states.push("q0".to_string());
        }
        let a = TreeAutomaton::new(arity, self.alphabet, states, first, self.transitions)?;
        a.with_initial_states(initials)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::TextTree;

    #[test]
    fn single_leaf_language() {
        let mut b = Builder::new();
        b.transition("s", "a", &[]);
        let a = b.build(2, "s").unwrap();
        let t = TextTree::parse("a").unwrap().resolve(&a.alphabet).unwrap();
        assert!(a.accepts(&t).unwrap());
        let run = a.accepting_run(&t).unwrap().unwrap();
        assert!(a.is_accepting_run(&t, &run));
    }

    #[test]
    fn arity_violation_is_an_error() {
        let mut b = Builder::new();
        b.transition("s", "a", &[]).transition("s", "a", &["s", "s"]);
        let a = b.build(2, "s").unwrap();
        let t = TextTree::parse("a(a,a,a)").unwrap().resolve(&a.alphabet).unwrap();
        assert!(a.accepts(&t).is_err());
    }

    #[test]
    fn json_round_trip_and_duplicates() {
        let mut b = Builder::new();
        b.transition("s", "a", &[]).transition("s", "b", &["s", "s"]);
        let a = b.build(2, "s").unwrap();
        let back = TreeAutomaton::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
        let mut v = a.to_json();
        let t0 = v["transitions"][0].clone();
        v["transitions"].as_array_mut().unwrap().push(t0);
        assert!(TreeAutomaton::from_json(&v).is_err());
    }

    #[test]
    fn super_initial_state_accepts_union() {
        let mut b = Builder::new();
        let p = b.state("p");
        let q = b.state("q");
        b.transition("p", "a", &[]).transition("q", "b", &[]);
        let a = b.build_multi(2, &[p, q]).unwrap();
        for (txt, ok) in [("a", true), ("b", true)] {
            let t = TextTree::parse(txt).unwrap().resolve(&a.alphabet).unwrap();
            assert_eq!(a.accepts(&t).unwrap(), ok);
        }
    }
}
