//! The unrolled automaton `T̄`: state `s` at level `i` accepts exactly the
//! trees of size `i` accepted from `s`.
//!
//! The leveled transition set is kept implicit. For every binary transition
//! `(s, a, q r)` and split `j ∈ [1, i−2]`, the state `s^i` has the leveled
//! transition `(a, q^j, r^{i−j−1})`; leaf transitions live at level 1.

use crate::automaton::{Builder, TreeAutomaton};
use crate::error::{Error, Result};
use crate::tree::Symbol;

/// A binary transition `(from, symbol, left, right)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BinaryTransition {
    pub from: usize,
    pub symbol: Symbol,
    pub left: usize,
    pub right: usize,
}

/// A leveled transition `(s^i, a, q^j r^{i−j−1})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LeveledTransition {
    pub symbol: Symbol,
    pub left: usize,
    pub left_size: usize,
    pub right: usize,
    pub right_size: usize,
    /// Position of the underlying binary transition among those of `s`.
    pub base: usize,
}

#[derive(Clone, Debug)]
pub struct Unrolled {
    pub base: TreeAutomaton,
    pub n: usize,
    leaves: Vec<Vec<Symbol>>,
    binary: Vec<Vec<BinaryTransition>>,
}

impl Unrolled {
    /// Unrolls a binary automaton to `n` levels.
    pub fn new(base: &TreeAutomaton, n: usize) -> Result<Self> {
        if !base.is_binary() {
            return Err(Error::invalid("unrolling needs a binary automaton"));
        }
        if n == 0 {
            return Err(Error::invalid("the number of levels must be at least 1"));
        }
        let ns = base.num_states();
        let mut leaves = vec![Vec::new(); ns];
        let mut binary = vec![Vec::new(); ns];
        for t in &base.transitions {
            if t.children.is_empty() {
                leaves[t.from].push(t.symbol);
            } else {
                binary[t.from].push(BinaryTransition {
                    from: t.from,
                    symbol: t.symbol,
                    left: t.children[0],
                    right: t.children[1],
                });
            }
        }
        Ok(Unrolled {
            base: base.clone(),
            n,
            leaves,
            binary,
        })
    }

    pub fn num_states(&self) -> usize {
        self.base.num_states()
    }

    /// Symbols `a` with `(s, a, λ) ∈ Δ`.
    pub fn leaf_symbols(&self, s: usize) -> &[Symbol] {
        &self.leaves[s]
    }

    pub fn binary_transitions(&self, s: usize) -> &[BinaryTransition] {
        &self.binary[s]
    }

    /// Exact `N(s^1)`.
    pub fn level1_exact(&self, s: usize) -> usize {
        self.leaves[s].len()
    }

    /// Leveled transitions of `s^i` in declaration order, splits ascending.
    pub fn leveled(&self, s: usize, i: usize) -> Vec<LeveledTransition> {
        let mut out = Vec::new();
        if i < 3 {
            return out;
        }
        for (b, t) in self.binary[s].iter().enumerate() {
            for j in 1..=i - 2 {
                out.push(LeveledTransition {
                    symbol: t.symbol,
                    left: t.left,
                    left_size: j,
                    right: t.right,
                    right_size: i - j - 1,
                    base: b,
                });
            }
        }
        out
    }

    /// Number of leveled transitions over all states and levels `≤ n`.
    pub fn num_leveled_transitions(&self) -> usize {
        let leaf: usize = self.leaves.iter().map(Vec::len).sum();
        let bin: usize = self.binary.iter().map(Vec::len).sum();
        leaf + bin * (1..=self.n).map(|i| i.saturating_sub(2)).sum::<usize>()
    }

    /// Materializes `T̄` as an explicit automaton with states named `s^i`
    /// and initial state `initial^n`.
    pub fn to_automaton(&self) -> Result<TreeAutomaton> {
        let mut b = Builder::new();
        for sym in self.base.alphabet.symbols() {
            b.symbol(self.base.alphabet.name(sym));
        }
        let name = |s: usize, i: usize| format!("{}^{}", self.base.states[s], i);
        for i in 1..=self.n {
            for s in 0..self.num_states() {
                b.state(&name(s, i));
            }
        }
        for s in 0..self.num_states() {
            for &a in &self.leaves[s] {
                let from = b.state(&name(s, 1));
                b.raw_transition(from, a, vec![]);
            }
            for i in 3..=self.n {
                for t in self.leveled(s, i) {
                    let from = b.state(&name(s, i));
                    let l = b.state(&name(t.left, t.left_size));
                    let r = b.state(&name(t.right, t.right_size));
                    b.raw_transition(from, t.symbol, vec![l, r]);
                }
            }
        }
        b.build(2, &name(self.base.initial, self.n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracles::brute_slice;

    #[test]
    fn level_one_has_only_leaf_transitions() {
        let u = Unrolled::new(&fixtures::double_branch(), 1).unwrap();
        let a = u.to_automaton().unwrap();
        assert!(a.transitions.iter().all(|t| t.children.is_empty()));
        assert_eq!(u.level1_exact(u.base.state_index("r").unwrap()), 1);
        assert_eq!(u.level1_exact(u.base.state_index("s").unwrap()), 0);
    }

    #[test]
    fn unrolled_slice_matches_original() {
        let base = fixtures::double_branch();
        for n in [5, 7] {
            let u = Unrolled::new(&base, n).unwrap();
            let a = u.to_automaton().unwrap();
            let lhs = brute_slice(&a, n, 10_000_000).unwrap();
            let rhs = brute_slice(&base, n, 10_000_000).unwrap();
            assert_eq!(lhs.trees, rhs.trees);
            assert!(u.num_leveled_transitions() <= n * n * base.transitions.len());
        }
    }
}
