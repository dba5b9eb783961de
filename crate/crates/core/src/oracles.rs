//! Exact ground-truth counters: slice enumeration, state-set class counting
//! and run-count dynamic programming.

use crate::automaton::{StateSet, TreeAutomaton};
use crate::error::{Error, Result};
use crate::tree::{Symbol, Tree};
use num_bigint::BigUint;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, HashMap};

pub use crate::cq::brute::brute_cq_count;
pub use crate::nfa::brute::brute_nfa_count;

/// All trees of size `n` accepted by an automaton, in canonical order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceEnumeration {
    pub n: usize,
    pub trees: Vec<Tree>,
}

impl SliceEnumeration {
    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }
}

/// Symbol/child-count pairs that occur in some transition.
fn shapes(a: &TreeAutomaton) -> Vec<(Symbol, usize)> {
    let mut v: Vec<(Symbol, usize)> = a
        .transitions
        .iter()
        .map(|t| (t.symbol, t.children.len()))
        .collect();
    v.sort();
    v.dedup();
    v
}

/// Calls `f` on every composition of `total` into `parts` positive summands.
fn compositions(total: usize, parts: usize, f: &mut dyn FnMut(&[usize]) -> Result<()>) -> Result<()> {
    fn go(
        rest: usize,
        left: usize,
        cur: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]) -> Result<()>,
    ) -> Result<()> {
        if left == 0 {
            return if rest == 0 { f(cur) } else { Ok(()) };
        }
        if rest < left {
            return Ok(());
        }
        for x in 1..=rest - (left - 1) {
            cur.push(x);
            go(rest - x, left - 1, cur, f)?;
            cur.pop();
        }
        Ok(())
    }
    go(total, parts, &mut Vec::new(), f)
}

struct Counter {
    used: u64,
    budget: u64,
}

impl Counter {
    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.budget {
            return Err(Error::Budget(format!(
                "exact enumeration needs more than {} membership tests",
                self.budget
            )));
        }
        Ok(())
    }
}

/// Enumerates `L_n(T)` exactly. Trees are built size by size, keeping only
/// those accepted from at least one state, so the work is bounded by the
/// number of such trees. Exceeding `budget` membership tests is an error.
pub fn brute_slice(a: &TreeAutomaton, n: usize, budget: u64) -> Result<SliceEnumeration> {
    if n == 0 {
        return Ok(SliceEnumeration { n, trees: vec![] });
    }
    let shapes = shapes(a);
    let mut counter = Counter { used: 0, budget };
    let mut by_size: Vec<Vec<(Tree, StateSet)>> = vec![Vec::new(); n + 1];
    for s in 1..=n {
        let mut found = Vec::new();
        for &(sym, c) in &shapes {
            if c == 0 {
                if s == 1 {
                    counter.tick()?;
                    let set = a.combine(sym, &[]);
                    if !set.is_clear() {
                        found.push((Tree::leaf(sym), set));
                    }
                }
                continue;
            }
            if s < c + 1 {
                continue;
            }
            compositions(s - 1, c, &mut |sizes| {
                let mut idx = vec![0usize; c];
                if sizes.iter().any(|&z| by_size[z].is_empty()) {
                    return Ok(());
                }
                loop {
                    counter.tick()?;
                    let sets: Vec<StateSet> =
                        (0..c).map(|i| by_size[sizes[i]][idx[i]].1.clone()).collect();
                    let set = a.combine(sym, &sets);
                    if !set.is_clear() {
                        let kids = (0..c).map(|i| by_size[sizes[i]][idx[i]].0.clone()).collect();
                        found.push((Tree::node(sym, kids), set));
                    }
                    // Odometer over the child choices.
                    let mut k = c;
                    loop {
                        if k == 0 {
                            return Ok(());
                        }
                        k -= 1;
                        idx[k] += 1;
                        if idx[k] < by_size[sizes[k]].len() {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
            })?;
        }
        by_size[s] = found;
    }
    let mut trees: Vec<(String, Tree)> = std::mem::take(&mut by_size[n])
        .into_iter()
        .filter(|(_, set)| set.contains(a.initial))
        .map(|(t, _)| (t.to_text(&a.alphabet), t))
        .collect();
    trees.sort_by(|x, y| x.0.cmp(&y.0));
    Ok(SliceEnumeration {
        n,
        trees: trees.into_iter().map(|(_, t)| t).collect(),
    })
}

/// Exact `|L_n(T)|` by counting trees grouped by their state sets. This is
/// an independent cross-check for [`brute_slice`] that scales to larger
/// slices; `budget` bounds the number of class combinations visited.
pub fn state_set_count(a: &TreeAutomaton, n: usize, budget: u64) -> Result<BigUint> {
    if n == 0 {
        return Ok(BigUint::zero());
    }
    let shapes = shapes(a);
    let mut counter = Counter { used: 0, budget };
    let mut by_size: Vec<Vec<(StateSet, BigUint)>> = vec![Vec::new(); n + 1];
    for s in 1..=n {
        let mut acc: BTreeMap<Vec<usize>, (StateSet, BigUint)> = BTreeMap::new();
        let mut add = |set: StateSet, w: BigUint| {
            if set.is_clear() || w.is_zero() {
                return;
            }
            let key: Vec<usize> = set.ones().collect();
            let e = acc.entry(key).or_insert_with(|| (set, BigUint::zero()));
            e.1 += w;
        };
        for &(sym, c) in &shapes {
            if c == 0 {
                if s == 1 {
                    counter.tick()?;
                    add(a.combine(sym, &[]), BigUint::one());
                }
                continue;
            }
            if s < c + 1 {
                continue;
            }
            compositions(s - 1, c, &mut |sizes| {
                if sizes.iter().any(|&z| by_size[z].is_empty()) {
                    return Ok(());
                }
                let mut idx = vec![0usize; c];
                loop {
                    counter.tick()?;
                    let sets: Vec<StateSet> =
                        (0..c).map(|i| by_size[sizes[i]][idx[i]].0.clone()).collect();
                    let mut w = BigUint::one();
                    for i in 0..c {
                        w *= &by_size[sizes[i]][idx[i]].1;
                    }
                    add(a.combine(sym, &sets), w);
                    let mut k = c;
                    loop {
                        if k == 0 {
                            return Ok(());
                        }
                        k -= 1;
                        idx[k] += 1;
                        if idx[k] < by_size[sizes[k]].len() {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
            })?;
        }
        by_size[s] = acc.into_values().collect();
    }
    Ok(by_size[n]
        .iter()
        .filter(|(set, _)| set.contains(a.initial))
        .map(|(_, w)| w.clone())
        .sum())
}

/// Number of (tree, run) pairs per size and state: `R[i][q]` counts runs of
/// `T[q]` over trees of size `i`.
pub fn run_count_table(a: &TreeAutomaton, n: usize) -> Vec<Vec<BigUint>> {
    let ns = a.num_states();
    let mut r = vec![vec![BigUint::zero(); ns]; n + 1];
    for i in 1..=n {
        for t in &a.transitions {
            if t.children.is_empty() {
                if i == 1 {
                    r[1][t.from] += 1u32;
                }
                continue;
            }
            // Convolve the children's run counts over sizes summing to i − 1.
            let mut conv = vec![BigUint::zero(); i];
            conv[0] = BigUint::one();
            for &c in &t.children {
                let mut next = vec![BigUint::zero(); i];
                for (used, w) in conv.iter().enumerate() {
                    if w.is_zero() {
                        continue;
                    }
                    for z in 1..i - used {
                        if !r[z][c].is_zero() {
                            next[used + z] += w * &r[z][c];
                        }
                    }
                }
                conv = next;
            }
            let v = std::mem::take(&mut conv[i - 1]);
            r[i][t.from] += v;
        }
    }
    r
}

/// Exact `|L_n(T)|` for a bottom-up deterministic automaton.
pub fn dp_count_bottom_up_deterministic(a: &TreeAutomaton, n: usize) -> Result<BigUint> {
    let mut seen: HashMap<(Symbol, &[usize]), usize> = HashMap::new();
    for (i, t) in a.transitions.iter().enumerate() {
        if let Some(&j) = seen.get(&(t.symbol, t.children.as_slice())) {
            let show = |k: usize| {
                let t = &a.transitions[k];
                format!(
                    "({}, {}, [{}])",
                    a.states[t.from],
                    a.alphabet.name(t.symbol),
                    t.children.iter().map(|&c| a.states[c].as_str()).collect::<Vec<_>>().join(",")
                )
            };
            return Err(Error::invalid(format!(
                "automaton is not bottom-up deterministic: {} and {} conflict",
                show(j),
                show(i)
            )));
        }
        seen.insert((t.symbol, t.children.as_slice()), i);
    }
    Ok(dp_count_unambiguous(a, n))
}

/// Run-count recurrence `N(s^i) = Σ N(q^j)·N(r^{i−j−1})`. Exact when every
/// accepted tree has a unique run; ambiguous automata are overcounted.
pub fn dp_count_unambiguous(a: &TreeAutomaton, n: usize) -> BigUint {
    if n == 0 {
        return BigUint::zero();
    }
    run_count_table(a, n)[n][a.initial].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn catalan_slices() {
        let a = fixtures::catalan();
        let counts: Vec<usize> = (1..=11)
            .map(|n| brute_slice(&a, n, 1_000_000).unwrap().len())
            .collect();
        assert_eq!(counts, vec![1, 0, 1, 0, 2, 0, 5, 0, 14, 0, 42]);
    }

    #[test]
    fn budget_refuses_instead_of_truncating() {
        let a = fixtures::catalan();
        assert!(matches!(brute_slice(&a, 15, 100), Err(Error::Budget(_))));
    }

    #[test]
    fn deterministic_dp_detects_conflicts() {
        let a = fixtures::double_branch();
        let e = dp_count_bottom_up_deterministic(&a, 5).unwrap_err();
        assert!(e.to_string().contains("conflict"));
        let c = fixtures::catalan();
        assert_eq!(dp_count_bottom_up_deterministic(&c, 11).unwrap(), BigUint::from(42u32));
    }

    #[test]
    fn empty_transition_set_counts_zero() {
        let a = TreeAutomaton::new(2, Default::default(), vec!["s".into()], 0, vec![]).unwrap();
        assert_eq!(dp_count_bottom_up_deterministic(&a, 1).unwrap(), BigUint::zero());
        assert!(brute_slice(&a, 1, 10).unwrap().is_empty());
    }

    #[test]
    fn state_set_count_matches_enumeration() {
        let a = fixtures::double_branch();
        for n in 1..=13 {
            let e = brute_slice(&a, n, 10_000_000).unwrap().len();
            assert_eq!(state_set_count(&a, n, 10_000_000).unwrap(), BigUint::from(e));
        }
    }
}
