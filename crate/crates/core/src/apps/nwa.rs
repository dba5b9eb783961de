//! Nested word automata over well-matched nested words.
//!
//! A well-matched nested word of length `n` is encoded as a full binary
//! tree with `n` internal nodes and `n + 1` leaves `#`, built by
//!
//! ```text
//! W := #  |  i.a(#, W)  |  c.a(U, W)
//! U := r.b(#, #)  |  i.a(#, U)  |  c.a(U, U)
//! ```
//!
//! where `W` is a suffix at depth zero and `U` is the part of a call's
//! scope up to and including its matching return. The encoding is a
//! bijection, so `|L_{2n+1}(T)| = |L_n(A)|`.

use crate::automaton::{Transition, TreeAutomaton};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::fpras::{fpras_ta, Estimate};
use crate::tree::{Alphabet, Symbol, Tree};
use serde_json::Value;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

/// `A = (Q, Q0, F, P, δc, δi, δr)` over `Σ`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Nwa {
    pub states: Vec<String>,
    pub alphabet: Vec<String>,
    pub hierarchical: Vec<String>,
    pub initial: Vec<usize>,
    pub accepting: Vec<usize>,
    /// `(q, a, q', p)`: on call `a`, move to `q'` and push `p`.
    pub call: Vec<(usize, usize, usize, usize)>,
    /// `(q, a, q')`.
    pub internal: Vec<(usize, usize, usize)>,
    /// `(q, p, a, q')`: on return `a` with `p` on top, pop and move to `q'`.
    pub ret: Vec<(usize, usize, usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Call,
    Internal,
    Return,
}

/// A well-matched nested word as a tagged symbol sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NestedWord {
    pub positions: Vec<(Kind, usize)>,
}

impl NestedWord {
    /// Matching pairs `(call, return)`, 1-based.
    pub fn matching(&self) -> Vec<(usize, usize)> {
        let mut stack = Vec::new();
        let mut out = Vec::new();
        for (i, (k, _)) in self.positions.iter().enumerate() {
            match k {
                Kind::Call => stack.push(i + 1),
                Kind::Return => out.push((stack.pop().expect("well matched"), i + 1)),
                Kind::Internal => {}
            }
        }
        out.sort_unstable();
        out
    }

    /// `<a` for calls, `a>` for returns, `a` for internals.
    pub fn to_text(&self, nwa: &Nwa) -> String {
        self.positions
            .iter()
            .map(|&(k, a)| {
                let s = &nwa.alphabet[a];
                match k {
                    Kind::Call => format!("<{s}"),
                    Kind::Internal => s.clone(),
                    Kind::Return => format!("{s}>"),
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl Nwa {
    /// `{states, alphabet, hierarchical, initial, final, call: [[q,a,q',p]],
    /// internal: [[q,a,q']], return: [[q,p,a,q']]}`. `initial` and `final`
    /// may be a name or a list of names.
    pub fn from_json(v: &Value) -> Result<Nwa> {
        let names = |key: &str, required: bool| -> Result<Vec<String>> {
            match v.get(key) {
                None if !required => Ok(Vec::new()),
                Some(Value::String(s)) => Ok(vec![s.clone()]),
                Some(Value::Array(a)) => a
                    .iter()
                    .map(|x| x.as_str().map(str::to_string).ok_or_else(|| Error::invalid(format!("`{key}` entries must be strings"))))
                    .collect(),
                _ => Err(Error::invalid(format!("NWA needs `{key}`"))),
            }
        };
        let states = names("states", true)?;
        let alphabet = names("alphabet", true)?;
        let hierarchical = names("hierarchical", false)?;
        let lookup = |list: &[String], what: &str, s: &str| -> Result<usize> {
            list.iter().position(|x| x == s).ok_or_else(|| Error::invalid(format!("undeclared {what} `{s}`")))
        };
        let initial = names("initial", true)?.iter().map(|s| lookup(&states, "state", s)).collect::<Result<Vec<_>>>()?;
        let accepting = names("final", true)?.iter().map(|s| lookup(&states, "state", s)).collect::<Result<Vec<_>>>()?;
        let rows = |key: &str, width: usize| -> Result<Vec<Vec<String>>> {
            let Some(arr) = v.get(key) else { return Ok(Vec::new()) };
            arr.as_array()
                .ok_or_else(|| Error::invalid(format!("`{key}` must be an array")))?
                .iter()
                .map(|r| {
                    let r = r.as_array().filter(|r| r.len() == width).ok_or_else(|| Error::invalid(format!("`{key}` rows have {width} entries")))?;
                    r.iter()
                        .map(|x| x.as_str().map(str::to_string).ok_or_else(|| Error::invalid(format!("`{key}` entries must be strings"))))
                        .collect()
                })
                .collect()
        };
        let (q, a, p) = (|s: &str| lookup(&states, "state", s), |s: &str| lookup(&alphabet, "symbol", s), |s: &str| lookup(&hierarchical, "hierarchical state", s));
        let call = rows("call", 4)?.iter().map(|r| Ok((q(&r[0])?, a(&r[1])?, q(&r[2])?, p(&r[3])?))).collect::<Result<Vec<_>>>()?;
        let internal = rows("internal", 3)?.iter().map(|r| Ok((q(&r[0])?, a(&r[1])?, q(&r[2])?))).collect::<Result<Vec<_>>>()?;
        let ret = rows("return", 4)?.iter().map(|r| Ok((q(&r[0])?, p(&r[1])?, a(&r[2])?, q(&r[3])?))).collect::<Result<Vec<_>>>()?;
        Ok(Nwa { states, alphabet, hierarchical, initial, accepting, call, internal, ret })
    }

    pub fn to_json(&self) -> Value {
        let s = |i: usize| self.states[i].clone();
        let a = |i: usize| self.alphabet[i].clone();
        let p = |i: usize| self.hierarchical[i].clone();
        serde_json::json!({
            "states": self.states,
            "alphabet": self.alphabet,
            "hierarchical": self.hierarchical,
            "initial": self.initial.iter().map(|&i| s(i)).collect::<Vec<_>>(),
            "final": self.accepting.iter().map(|&i| s(i)).collect::<Vec<_>>(),
            "call": self.call.iter().map(|&(x, y, z, w)| vec![s(x), a(y), s(z), p(w)]).collect::<Vec<_>>(),
            "internal": self.internal.iter().map(|&(x, y, z)| vec![s(x), a(y), s(z)]).collect::<Vec<_>>(),
            "return": self.ret.iter().map(|&(x, y, z, w)| vec![s(x), p(y), a(z), s(w)]).collect::<Vec<_>>(),
        })
    }

    /// Runs the word over all configurations `(state, stack)`.
    pub fn accepts(&self, w: &NestedWord) -> bool {
        let mut configs: HashSet<(usize, Vec<usize>)> = self.initial.iter().map(|&q| (q, Vec::new())).collect();
        for &(k, a) in &w.positions {
            let mut next = HashSet::new();
            for (q, stack) in &configs {
                match k {
                    Kind::Internal => {
                        for &(x, y, z) in &self.internal {
                            if x == *q && y == a {
                                next.insert((z, stack.clone()));
                            }
                        }
                    }
                    Kind::Call => {
                        for &(x, y, z, p) in &self.call {
                            if x == *q && y == a {
                                let mut s = stack.clone();
                                s.push(p);
                                next.insert((z, s));
                            }
                        }
                    }
                    Kind::Return => {
                        let Some((&top, rest)) = stack.split_last() else { continue };
                        for &(x, p, y, z) in &self.ret {
                            if x == *q && p == top && y == a {
                                next.insert((z, rest.to_vec()));
                            }
                        }
                    }
                }
            }
            configs = next;
        }
        configs.iter().any(|(q, s)| s.is_empty() && self.accepting.contains(q))
    }
}

/// Every well-matched nested word of length `n` over `sigma` symbols, in
/// lexicographic order of positions. `budget` bounds the number produced.
pub fn nested_words(n: usize, sigma: usize, budget: u64) -> Result<Vec<NestedWord>> {
    fn go(n: usize, sigma: usize, depth: usize, cur: &mut Vec<(Kind, usize)>, out: &mut Vec<NestedWord>, budget: u64) -> Result<()> {
        let left = n - cur.len();
        if left == 0 {
            if out.len() as u64 >= budget {
                return Err(Error::Budget(format!("more than {budget} nested words")));
            }
            out.push(NestedWord { positions: cur.clone() });
            return Ok(());
        }
        for kind in [Kind::Call, Kind::Internal, Kind::Return] {
            let ok = match kind {
                Kind::Call => depth + 2 <= left,
                Kind::Internal => depth < left,
                Kind::Return => depth > 0,
            };
            if !ok {
                continue;
            }
            let d = match kind {
                Kind::Call => depth + 1,
                Kind::Internal => depth,
                Kind::Return => depth - 1,
            };
            for a in 0..sigma {
                cur.push((kind, a));
                go(n, sigma, d, cur, out, budget)?;
                cur.pop();
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    go(n, sigma, 0, &mut Vec::with_capacity(n), &mut out, budget)?;
    Ok(out)
}

/// `|L_n(A)|` by enumerating nested words and simulating the automaton.
pub fn brute_nwa_count(a: &Nwa, n: usize, budget: u64) -> Result<u64> {
    Ok(nested_words(n, a.alphabet.len(), budget)?.iter().filter(|w| a.accepts(w)).count() as u64)
}

/// Tree automaton over the encoding, with its symbols and tree size.
pub struct NwaAutomaton {
    pub automaton: TreeAutomaton,
    /// `2n + 1`.
    pub tree_size: usize,
    call_sym: Vec<Symbol>,
    internal_sym: Vec<Symbol>,
    return_sym: Vec<Symbol>,
    leaf: Symbol,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Key {
    Nil,
    /// Depth-zero suffix from `q` ending in `q'`.
    W(usize, usize),
    /// Call scope from `q`, popping `p`, ending in `q'`.
    U(usize, usize, usize),
}

/// Builds the encoding automaton for words of length `n`.
pub fn nwa_to_ta(a: &Nwa, n: usize) -> Result<NwaAutomaton> {
    let mut alphabet = Alphabet::new();
    let leaf = alphabet.intern("#");
    let call_sym: Vec<Symbol> = a.alphabet.iter().map(|s| alphabet.intern(&format!("c.{s}"))).collect();
    let internal_sym: Vec<Symbol> = a.alphabet.iter().map(|s| alphabet.intern(&format!("i.{s}"))).collect();
    let return_sym: Vec<Symbol> = a.alphabet.iter().map(|s| alphabet.intern(&format!("r.{s}"))).collect();
    let nq = a.states.len();
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut names = Vec::new();
    let mut queue = VecDeque::new();
    let mut state = |k: Key, names: &mut Vec<String>, queue: &mut VecDeque<(Key, usize)>| -> usize {
        *index.entry(k).or_insert_with(|| {
            names.push(match k {
                Key::Nil => "nil".to_string(),
                Key::W(q, r) => format!("W({},{})", a.states[q], a.states[r]),
                Key::U(q, p, r) => format!("U({},{},{})", a.states[q], a.hierarchical[p], a.states[r]),
            });
            queue.push_back((k, names.len() - 1));
            names.len() - 1
        })
    };
    let nil = state(Key::Nil, &mut names, &mut queue);
    let initials: Vec<usize> = a
        .initial
        .iter()
        .flat_map(|&q| a.accepting.iter().map(move |&f| Key::W(q, f)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|k| state(k, &mut names, &mut queue))
        .collect();
    let mut transitions = Vec::new();
    while let Some((k, from)) = queue.pop_front() {
        match k {
            Key::Nil => transitions.push(Transition { from, symbol: leaf, children: vec![] }),
            Key::W(q, r) => {
                if q == r {
                    transitions.push(Transition { from, symbol: leaf, children: vec![] });
                }
                for &(_, s, y) in a.internal.iter().filter(|t| t.0 == q) {
                    let c = state(Key::W(y, r), &mut names, &mut queue);
                    transitions.push(Transition { from, symbol: internal_sym[s], children: vec![nil, c] });
                }
                for &(_, s, y, p) in a.call.iter().filter(|t| t.0 == q) {
                    for mid in 0..nq {
                        let u = state(Key::U(y, p, mid), &mut names, &mut queue);
                        let w = state(Key::W(mid, r), &mut names, &mut queue);
                        transitions.push(Transition { from, symbol: call_sym[s], children: vec![u, w] });
                    }
                }
            }
            Key::U(q, p, r) => {
                for &(_, _, s, _) in a.ret.iter().filter(|t| t.0 == q && t.1 == p && t.3 == r) {
                    transitions.push(Transition { from, symbol: return_sym[s], children: vec![nil, nil] });
                }
                for &(_, s, y) in a.internal.iter().filter(|t| t.0 == q) {
                    let c = state(Key::U(y, p, r), &mut names, &mut queue);
                    transitions.push(Transition { from, symbol: internal_sym[s], children: vec![nil, c] });
                }
                for &(_, s, y, p2) in a.call.iter().filter(|t| t.0 == q) {
                    for mid in 0..nq {
                        let inner = state(Key::U(y, p2, mid), &mut names, &mut queue);
                        let rest = state(Key::U(mid, p, r), &mut names, &mut queue);
                        transitions.push(Transition { from, symbol: call_sym[s], children: vec![inner, rest] });
                    }
                }
            }
        }
    }
    let base = TreeAutomaton::new(2, alphabet, names, nil, transitions)?;
    let automaton = base.with_initial_states(&initials)?;
    Ok(NwaAutomaton { automaton, tree_size: 2 * n + 1, call_sym, internal_sym, return_sym, leaf })
}

impl NwaAutomaton {
    /// The tree of a nested word.
    pub fn encode(&self, w: &NestedWord) -> Tree {
        // Returns the tree of the W or U segment starting at `i` and the
        // position after it.
        fn seg(me: &NwaAutomaton, w: &[(Kind, usize)], i: usize, scope: bool) -> (Tree, usize) {
            if i == w.len() {
                return (Tree::leaf(me.leaf), i);
            }
            let (k, a) = w[i];
            match k {
                Kind::Return if scope => (Tree::node(me.return_sym[a], vec![Tree::leaf(me.leaf), Tree::leaf(me.leaf)]), i + 1),
                Kind::Return => (Tree::leaf(me.leaf), i),
                Kind::Internal => {
                    let (rest, j) = seg(me, w, i + 1, scope);
                    (Tree::node(me.internal_sym[a], vec![Tree::leaf(me.leaf), rest]), j)
                }
                Kind::Call => {
                    let (inner, j) = seg(me, w, i + 1, true);
                    let (rest, k) = seg(me, w, j, scope);
                    (Tree::node(me.call_sym[a], vec![inner, rest]), k)
                }
            }
        }
        seg(self, &w.positions, 0, false).0
    }

    /// The nested word of an encoding tree, read in preorder.
    pub fn decode(&self, t: &Tree) -> Result<NestedWord> {
        let mut positions = Vec::new();
        let mut stack = vec![t];
        while let Some(t) = stack.pop() {
            if t.label == self.leaf {
                continue;
            }
            let sym = t.label;
            let (kind, a) = if let Some(a) = self.call_sym.iter().position(|&s| s == sym) {
                (Kind::Call, a)
            } else if let Some(a) = self.internal_sym.iter().position(|&s| s == sym) {
                (Kind::Internal, a)
            } else if let Some(a) = self.return_sym.iter().position(|&s| s == sym) {
                (Kind::Return, a)
            } else {
                return Err(Error::invalid("unknown symbol in nested-word tree"));
            };
            if t.children.len() != 2 {
                return Err(Error::invalid("nested-word tree nodes are binary"));
            }
            positions.push((kind, a));
            stack.push(&t.children[1]);
            stack.push(&t.children[0]);
        }
        Ok(NestedWord { positions })
    }
}

/// Estimate of `|L_n(A)|`.
pub fn count_nwa(a: &Nwa, n: usize, cfg: &Config) -> Result<Estimate> {
    let t = nwa_to_ta(a, n)?;
    fpras_ta(&t.automaton, t.tree_size, cfg)
}

/// A deterministic automaton accepting exactly one nested word of length
/// eight over `{a}`, with matching `{(1,7), (2,4), (5,6)}`.
pub fn single_shape() -> Nwa {
    let states: Vec<String> = (0..=8).map(|i| format!("s{i}")).collect();
    Nwa {
        states,
        alphabet: vec!["a".into()],
        hierarchical: vec!["outer".into(), "inner".into()],
        initial: vec![0],
        accepting: vec![8],
        call: vec![(0, 0, 1, 0), (1, 0, 2, 1), (4, 0, 5, 1)],
        internal: vec![(2, 0, 3), (7, 0, 8)],
        ret: vec![(3, 1, 0, 4), (5, 1, 0, 6), (6, 0, 0, 7)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::brute_slice;

    #[test]
    fn single_shape_counts_one() {
        let a = single_shape();
        assert_eq!(brute_nwa_count(&a, 8, 1 << 20).unwrap(), 1);
        let t = nwa_to_ta(&a, 8).unwrap();
        let slice = brute_slice(&t.automaton, 17, 1 << 22).unwrap();
        assert_eq!(slice.len(), 1);
        let w = t.decode(&slice.trees[0]).unwrap();
        assert_eq!(w.matching(), vec![(1, 7), (2, 4), (5, 6)]);
        assert_eq!(t.encode(&w), slice.trees[0]);
        for n in [0, 7, 9] {
            assert_eq!(brute_nwa_count(&a, n, 1 << 20).unwrap(), 0);
        }
    }

    #[test]
    fn encoding_is_a_bijection() {
        let a = Nwa {
            states: vec!["q".into()],
            alphabet: vec!["a".into(), "b".into()],
            hierarchical: vec!["p".into()],
            initial: vec![0],
            accepting: vec![0],
            call: vec![(0, 0, 0, 0), (0, 1, 0, 0)],
            internal: vec![(0, 0, 0), (0, 1, 0)],
            ret: vec![(0, 0, 0, 0), (0, 0, 1, 0)],
        };
        let t = nwa_to_ta(&a, 0).unwrap();
        for n in 0..=5 {
            let words = nested_words(n, 2, 1 << 20).unwrap();
            let slice = brute_slice(&t.automaton, 2 * n + 1, 1 << 22).unwrap();
            assert_eq!(slice.len(), words.len(), "n = {n}");
            let decoded: BTreeSet<NestedWord> = slice.trees.iter().map(|x| t.decode(x).unwrap()).collect();
            assert_eq!(decoded, words.iter().cloned().collect());
            for w in &words {
                assert!(t.automaton.accepts(&t.encode(w)).unwrap());
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let a = single_shape();
        assert_eq!(Nwa::from_json(&a.to_json()).unwrap(), a);
    }
}
