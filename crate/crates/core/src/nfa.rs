//! Succinct NFAs: transition labels are sets reached only through a
//! [`LabelOracle`] offering membership, approximate size and near-uniform
//! samples.
//!
//! Counting sweeps the states of a leveled NFA in topological order. Each
//! state's word count is estimated from its incoming transitions with
//! sampled first-occurrence fractions; words are sampled backwards from a
//! state by weighted transition choice with sketch-based acceptance ratios.

use crate::config::{checked_count, Config, Profile};
use crate::error::{Error, Result};
use crate::rng::{weighted_index, Rng, Seed};
use crate::tree::Alphabet;
use fixedbitset::FixedBitSet;
use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::Rng as _;
use serde_json::Value;
use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;
use std::rc::Rc;

/// Outcome of one sampling attempt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Draw<T> {
    Sample(T),
    Fail,
    /// The target set is empty.
    Empty,
}

impl<T> Draw<T> {
    pub fn sample(self) -> Option<T> {
        match self {
            Draw::Sample(t) => Some(t),
            _ => None,
        }
    }
}

/// Access to the label sets of a succinct NFA.
pub trait LabelOracle {
    type Label: Copy + Eq + Hash + Debug;
    type Item: Clone + Eq + Hash + Debug;

    fn contains(&self, label: Self::Label, item: &Self::Item) -> bool;
    /// `Ñ(A)`; zero only when `A` is empty.
    fn approx_size(&self, label: Self::Label) -> f64;
    /// A near-uniform element of `A`, or `None` on oracle failure.
    fn sample(&self, label: Self::Label, rng: &mut Rng) -> Option<Self::Item>;
    /// `false` only when the two sets are known to be disjoint.
    fn may_overlap(&self, a: Self::Label, b: Self::Label) -> bool;
    /// All elements, when the set is small and explicit.
    fn enumerate(&self, _label: Self::Label) -> Option<Vec<Self::Item>> {
        None
    }
    /// `log2` of an upper bound on `|A|`.
    fn log2_size_bound(&self, label: Self::Label) -> f64;
    /// Relative error of `approx_size` and `sample`.
    fn epsilon0(&self) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NfaTransition<L> {
    pub from: usize,
    pub label: L,
    pub to: usize,
}

/// An NFA with a single initial and a single final state.
#[derive(Clone, Debug)]
pub struct SuccinctNfa<L> {
    pub states: Vec<String>,
    pub initial: usize,
    pub final_state: usize,
    pub transitions: Vec<NfaTransition<L>>,
}

impl<L: Copy + Eq> SuccinctNfa<L> {
    pub fn new(
        states: Vec<String>,
        initial: usize,
        final_state: usize,
        transitions: Vec<NfaTransition<L>>,
    ) -> Result<Self> {
        let n = states.len();
        if initial >= n || final_state >= n {
            return Err(Error::invalid("initial or final state out of range"));
        }
        if transitions.iter().any(|t| t.from >= n || t.to >= n) {
            return Err(Error::invalid("transition references an unknown state"));
        }
        Ok(SuccinctNfa {
            states,
            initial,
            final_state,
            transitions,
        })
    }

    /// `|N|`: states plus transitions.
    pub fn size(&self) -> usize {
        self.states.len() + self.transitions.len()
    }

    /// Whether `word` leads from the initial state to `target`.
    pub fn word_membership<O>(&self, oracle: &O, target: usize, word: &[O::Item]) -> bool
    where
        O: LabelOracle<Label = L>,
    {
        let mut cur = FixedBitSet::with_capacity(self.states.len());
        cur.insert(self.initial);
        for a in word {
            let mut next = FixedBitSet::with_capacity(self.states.len());
            for t in &self.transitions {
                if cur.contains(t.from) && oracle.contains(t.label, a) {
                    next.insert(t.to);
                }
            }
            if next.is_clear() {
                return false;
            }
            cur = next;
        }
        cur.contains(target)
    }
}

/// The `k`-step unrolling: states `(p, α)` for `α ∈ [0, k]`, transitions
/// `(p^α, A, q^{α+1})`, initial `init^0`, final `final^k`. States off every
/// initial-to-final path are dropped.
pub fn unroll_nfa<L: Copy + Eq>(nfa: &SuccinctNfa<L>, k: usize) -> Result<SuccinctNfa<L>> {
    if k == 0 {
        return Err(Error::invalid("word length must be at least 1"));
    }
    let ns = nfa.states.len();
    let id = |p: usize, a: usize| a * ns + p;
    let total = (k + 1) * ns;
    let mut fwd = FixedBitSet::with_capacity(total);
    fwd.insert(id(nfa.initial, 0));
    for a in 0..k {
        for t in &nfa.transitions {
            if fwd.contains(id(t.from, a)) {
                fwd.insert(id(t.to, a + 1));
            }
        }
    }
    let mut bwd = FixedBitSet::with_capacity(total);
    bwd.insert(id(nfa.final_state, k));
    for a in (0..k).rev() {
        for t in &nfa.transitions {
            if bwd.contains(id(t.to, a + 1)) {
                bwd.insert(id(t.from, a));
            }
        }
    }
    let mut keep = fwd.clone();
    keep.intersect_with(&bwd);
    keep.insert(id(nfa.initial, 0));
    keep.insert(id(nfa.final_state, k));
    let mut index = vec![usize::MAX; total];
    let mut states = Vec::new();
    for a in 0..=k {
        for p in 0..ns {
            if keep.contains(id(p, a)) {
                index[id(p, a)] = states.len();
                states.push(format!("{}^{}", nfa.states[p], a));
            }
        }
    }
    let mut transitions = Vec::new();
    for a in 0..k {
        for t in &nfa.transitions {
            let (x, y) = (id(t.from, a), id(t.to, a + 1));
            if keep.contains(x) && keep.contains(y) && fwd.contains(x) && bwd.contains(y) {
                transitions.push(NfaTransition {
                    from: index[x],
                    label: t.label,
                    to: index[y],
                });
            }
        }
    }
    SuccinctNfa::new(
        states,
        index[id(nfa.initial, 0)],
        index[id(nfa.final_state, k)],
        transitions,
    )
}

/// A pruned, leveled NFA with states in topological order; state 0 is the
/// initial state.
#[derive(Clone, Debug)]
pub struct Leveled<L> {
    pub names: Vec<String>,
    pub level: Vec<usize>,
    pub transitions: Vec<NfaTransition<L>>,
    /// Declaration index of each transition in the source NFA.
    pub decl: Vec<usize>,
    pub incoming: Vec<Vec<usize>>,
    by_from_level: Vec<Vec<usize>>,
    pub final_state: usize,
    /// Word length; `None` when the final state is unreachable.
    pub k: Option<usize>,
}

impl<L: Copy + Eq> Leveled<L> {
    /// Prunes and orders an NFA whose transitions go from level `ℓ` to
    /// `ℓ+1`, levels being distances from the initial state.
    pub fn new(nfa: &SuccinctNfa<L>) -> Result<Self> {
        let ns = nfa.states.len();
        let mut level = vec![usize::MAX; ns];
        level[nfa.initial] = 0;
        let mut frontier = vec![nfa.initial];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); ns];
        for (i, t) in nfa.transitions.iter().enumerate() {
            out[t.from].push(i);
        }
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &x in &frontier {
                for &i in &out[x] {
                    let y = nfa.transitions[i].to;
                    if level[y] == usize::MAX {
                        level[y] = level[x] + 1;
                        next.push(y);
                    }
                }
            }
            frontier = next;
        }
        for t in &nfa.transitions {
            if level[t.from] != usize::MAX && level[t.to] != level[t.from] + 1 {
                return Err(Error::invalid("NFA is not leveled; unroll it first"));
            }
        }
        let mut co = FixedBitSet::with_capacity(ns);
        co.insert(nfa.final_state);
        let mut stack = vec![nfa.final_state];
        let mut inc: Vec<Vec<usize>> = vec![Vec::new(); ns];
        for (i, t) in nfa.transitions.iter().enumerate() {
            inc[t.to].push(i);
        }
        while let Some(y) = stack.pop() {
            for &i in &inc[y] {
                let x = nfa.transitions[i].from;
                if !co.contains(x) {
                    co.insert(x);
                    stack.push(x);
                }
            }
        }
        let reachable = level[nfa.final_state] != usize::MAX;
        let mut order: Vec<usize> = (0..ns)
            .filter(|&x| reachable && level[x] != usize::MAX && co.contains(x))
            .collect();
        if !reachable {
            order = vec![nfa.initial];
        }
        order.sort_by_key(|&x| (level[x], x != nfa.initial, x));
        let mut index = vec![usize::MAX; ns];
        for (i, &x) in order.iter().enumerate() {
            index[x] = i;
        }
        let mut tr: Vec<(usize, NfaTransition<L>)> = Vec::new();
        if reachable {
            for (i, t) in nfa.transitions.iter().enumerate() {
                if index[t.from] != usize::MAX && index[t.to] != usize::MAX {
                    tr.push((
                        i,
                        NfaTransition {
                            from: index[t.from],
                            label: t.label,
                            to: index[t.to],
                        },
                    ));
                }
            }
        }
        tr.sort_by_key(|(i, t)| (t.to, t.from, *i));
        let n = order.len();
        let lv: Vec<usize> = order.iter().map(|&x| level[x]).collect();
        let mut incoming = vec![Vec::new(); n];
        let maxl = lv.iter().copied().max().unwrap_or(0);
        let mut by_from_level = vec![Vec::new(); maxl + 1];
        for (j, (_, t)) in tr.iter().enumerate() {
            incoming[t.to].push(j);
            by_from_level[lv[t.from]].push(j);
        }
        Ok(Leveled {
            names: order.iter().map(|&x| nfa.states[x].clone()).collect(),
            level: lv,
            decl: tr.iter().map(|(i, _)| *i).collect(),
            transitions: tr.into_iter().map(|(_, t)| t).collect(),
            incoming,
            by_from_level,
            final_state: if reachable { index[nfa.final_state] } else { usize::MAX },
            k: reachable.then(|| level[nfa.final_state]),
        })
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    /// `|N|` after pruning.
    pub fn size(&self) -> usize {
        self.names.len() + self.transitions.len()
    }

    /// States reached from the initial state by reading `word`.
    pub fn reach<O>(&self, oracle: &O, word: &[O::Item]) -> FixedBitSet
    where
        O: LabelOracle<Label = L>,
    {
        let mut cur = FixedBitSet::with_capacity(self.num_states());
        cur.insert(0);
        for (p, a) in word.iter().enumerate() {
            let mut next = FixedBitSet::with_capacity(self.num_states());
            if let Some(ts) = self.by_from_level.get(p) {
                for &j in ts {
                    let t = &self.transitions[j];
                    if cur.contains(t.from) && oracle.contains(t.label, a) {
                        next.insert(t.to);
                    }
                }
            }
            cur = next;
        }
        cur
    }
}

/// A sampled word together with the states it reaches.
#[derive(Clone, Debug)]
pub struct Word<I> {
    pub items: Vec<I>,
    pub reach: FixedBitSet,
}

/// Trial counts and sketch sizes. Values are kept real so that verbatim
/// formulas are only checked against the budget when actually needed.
#[derive(Clone, Debug, PartialEq)]
pub struct NfaParams {
    pub epsilon: f64,
    pub delta: f64,
    pub profile: Profile,
    /// Words per state sketch.
    pub sketch: f64,
    /// Trials per first-occurrence fraction.
    pub trials: f64,
    /// Rejection-rate trials.
    pub rho_trials: f64,
    /// Iteration cap of one backward sampling run.
    pub cap: f64,
    /// Attempts per sketch slot.
    pub slot_retries: usize,
    pub budget: u64,
}

impl NfaParams {
    /// Parameters for an NFA of size `r` whose languages have at most
    /// `2^log2_n` words.
    pub fn new(cfg: &Config, epsilon: f64, r: usize, log2_n: f64) -> Self {
        let r = r.max(2) as f64;
        let eps = epsilon;
        let delta = cfg.delta;
        let gamma = (1.0 / delta).ln();
        let ln_n = (log2_n.max(1.0) * std::f64::consts::LN_2 + (1.0 / eps).ln()).max(1.0);
        let cap = 10.0 * r.powi(4) * (ln_n + r.ln()).ceil() * gamma.ceil();
        let (sketch, trials, rho_trials) = match cfg.profile {
            Profile::Theory => (
                (r.powi(3) * gamma / (eps * eps)).ceil(),
                (gamma * r.powi(5) / (eps * eps)).ceil(),
                (ln_n * gamma * r.powi(10) / (eps * eps)).ceil(),
            ),
            Profile::Practical => {
                let l = (r / delta).ln();
                (
                    cfg.c_sketch * (l / (eps * eps)).ceil(),
                    cfg.c_trials * (l / (eps * eps)).ceil(),
                    cfg.c_rho * ((1.0 / delta).ln() / (eps * eps)).ceil(),
                )
            }
        };
        let slot_retries = ((sketch.min(1e9) * r / delta).ln() / (4.0f64 / 3.0).ln()).ceil() as usize;
        NfaParams {
            epsilon: eps,
            delta,
            profile: cfg.profile,
            sketch,
            trials,
            rho_trials,
            cap,
            slot_retries: slot_retries.max(3),
            budget: cfg.budget,
        }
    }
}

/// Diagnostics of one estimator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NfaStats {
    /// Final acceptance probabilities above 1 that were clamped.
    pub clamps: u64,
    /// Sampling runs stopped by the iteration cap.
    pub cap_hits: u64,
    /// Sampling runs ending in FAIL.
    pub fails: u64,
    /// Calls to the label sampling oracle.
    pub oracle_samples: u64,
}

impl NfaStats {
    pub fn add(&mut self, o: &NfaStats) {
        self.clamps += o.clamps;
        self.cap_hits += o.cap_hits;
        self.fails += o.fails;
        self.oracle_samples += o.oracle_samples;
    }
}

/// Transitions into a backward frontier, in decreasing weight order.
struct Frontier {
    trans: Vec<usize>,
    z: Vec<f64>,
    total: f64,
}

/// Estimates and word sketches of a leveled NFA.
pub struct NfaEstimator<'a, O: LabelOracle> {
    nfa: &'a Leveled<O::Label>,
    oracle: &'a O,
    params: NfaParams,
    seed: Seed,
    est: Vec<Option<f64>>,
    sketches: Vec<Option<Rc<Vec<Word<O::Item>>>>>,
    frontiers: HashMap<Vec<usize>, Rc<Frontier>>,
    q_memo: HashMap<(usize, Vec<usize>), f64>,
    rho_memo: HashMap<Vec<usize>, f64>,
    pub stats: NfaStats,
}

impl<'a, O: LabelOracle> NfaEstimator<'a, O> {
    pub fn new(nfa: &'a Leveled<O::Label>, oracle: &'a O, params: NfaParams, seed: Seed) -> Self {
        let n = nfa.num_states();
        NfaEstimator {
            nfa,
            oracle,
            params,
            seed,
            est: vec![None; n],
            sketches: vec![None; n],
            frontiers: HashMap::new(),
            q_memo: HashMap::new(),
            rho_memo: HashMap::new(),
            stats: NfaStats::default(),
        }
    }

    /// `Ñ` of the final state; `0` when it is unreachable.
    pub fn count(&mut self) -> Result<f64> {
        if self.nfa.k.is_none() {
            return Ok(0.0);
        }
        self.estimate(self.nfa.final_state)
    }

    /// `Ñ(x)` from the incoming transitions of `x`.
    pub fn estimate(&mut self, x: usize) -> Result<f64> {
        if let Some(v) = self.est[x] {
            return Ok(v);
        }
        if x == 0 {
            self.est[0] = Some(1.0);
            return Ok(1.0);
        }
        let inc = self.nfa.incoming[x].clone();
        let mut live: Vec<usize> = Vec::new();
        let mut total = 0.0;
        for (pos, &j) in inc.iter().enumerate() {
            let t = self.nfa.transitions[j];
            let nv = self.estimate(t.from)?;
            let na = self.oracle.approx_size(t.label);
            if nv == 0.0 || na == 0.0 {
                continue;
            }
            let rivals: Vec<usize> = live
                .iter()
                .copied()
                .filter(|&r| self.oracle.may_overlap(self.nfa.transitions[r].label, t.label))
                .collect();
            let p = if rivals.iter().any(|&r| {
                let rt = &self.nfa.transitions[r];
                rt.from == t.from && rt.label == t.label
            }) {
                0.0
            } else if rivals.is_empty() {
                1.0
            } else {
                self.first_occurrence(x, pos, j, &rivals)?
            };
            live.push(j);
            total += nv * na * p;
        }
        self.est[x] = Some(total);
        Ok(total)
    }

    /// Fraction of sampled `w·a ∈ W(v)·A` outside the rival products.
    fn first_occurrence(&mut self, x: usize, pos: usize, j: usize, rivals: &[usize]) -> Result<f64> {
        let t = self.nfa.transitions[j];
        let d = checked_count(self.params.trials, self.params.budget, "overlap trials")?;
        let sketch = self.sketch(t.from)?;
        let mut rng = self.seed.derive("first", &[x as u64, pos as u64]).rng();
        let mut misses = 0usize;
        for trial in 0..d {
            let w = if trial < sketch.len() {
                sketch[trial].clone()
            } else {
                self.fresh_word(t.from, &mut rng)?
            };
            let a = self.oracle_sample(t.label, &mut rng)?;
            let hit = rivals.iter().any(|&r| {
                let rt = &self.nfa.transitions[r];
                w.reach.contains(rt.from) && self.oracle.contains(rt.label, &a)
            });
            if !hit {
                misses += 1;
            }
        }
        Ok(misses as f64 / d as f64)
    }

    fn oracle_sample(&mut self, label: O::Label, rng: &mut Rng) -> Result<O::Item> {
        for _ in 0..self.params.slot_retries {
            self.stats.oracle_samples += 1;
            if let Some(a) = self.oracle.sample(label, rng) {
                return Ok(a);
            }
        }
        Err(Error::Fail("label oracle failed to produce a sample".into()))
    }

    fn fresh_word(&mut self, x: usize, rng: &mut Rng) -> Result<Word<O::Item>> {
        for _ in 0..self.params.slot_retries {
            match self.sample_from_state(x, rng)? {
                Draw::Sample(w) => return Ok(w),
                Draw::Fail => continue,
                Draw::Empty => break,
            }
        }
        Err(Error::Fail(format!(
            "could not sample a word reaching `{}`",
            self.nfa.names[x]
        )))
    }

    /// The sketch `W̃(x)`, built on first use.
    pub fn sketch(&mut self, x: usize) -> Result<Rc<Vec<Word<O::Item>>>> {
        if let Some(s) = &self.sketches[x] {
            return Ok(s.clone());
        }
        let words = if x == 0 {
            let mut reach = FixedBitSet::with_capacity(self.nfa.num_states());
            reach.insert(0);
            vec![Word {
                items: Vec::new(),
                reach,
            }]
        } else if self.estimate(x)? == 0.0 {
            Vec::new()
        } else {
            let size = checked_count(self.params.sketch, self.params.budget, "sketch size")?;
            let mut rng = self.seed.derive("sketch", &[x as u64]).rng();
            let mut v = Vec::with_capacity(size);
            for _ in 0..size {
                let w = self.fresh_word(x, &mut rng)?;
                debug_assert!(w.reach.contains(x));
                v.push(w);
            }
            v
        };
        let rc = Rc::new(words);
        self.sketches[x] = Some(rc.clone());
        Ok(rc)
    }

    fn frontier(&mut self, back: &[usize]) -> Result<Rc<Frontier>> {
        if let Some(f) = self.frontiers.get(back) {
            return Ok(f.clone());
        }
        let mut items: Vec<(f64, usize, usize, usize)> = Vec::new();
        for &y in back {
            for &j in &self.nfa.incoming[y] {
                let t = self.nfa.transitions[j];
                let z = self.estimate(t.from)? * self.oracle.approx_size(t.label);
                if z > 0.0 {
                    items.push((z, t.from, self.nfa.decl[j], j));
                }
            }
        }
        items.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let f = Rc::new(Frontier {
            total: items.iter().map(|x| x.0).sum(),
            z: items.iter().map(|x| x.0).collect(),
            trans: items.iter().map(|x| x.3).collect(),
        });
        self.frontiers.insert(back.to_vec(), f.clone());
        Ok(f)
    }

    /// Positions in `f` whose label contains `a`.
    fn containing(&self, f: &Frontier, a: &O::Item) -> Vec<usize> {
        (0..f.trans.len())
            .filter(|&p| self.oracle.contains(self.nfa.transitions[f.trans[p]].label, a))
            .collect()
    }

    /// `q_{a,j}`: the fraction of `W̃(x_j)` outside `W(x_{j'})` for the
    /// earlier positions `j'` whose labels contain `a`.
    fn q_value(&mut self, f: &Frontier, pos: usize, containing: &[usize]) -> Result<f64> {
        let x = self.nfa.transitions[f.trans[pos]].from;
        let mut earlier: Vec<usize> = containing
            .iter()
            .filter(|&&p| p < pos)
            .map(|&p| self.nfa.transitions[f.trans[p]].from)
            .collect();
        if earlier.is_empty() {
            return Ok(1.0);
        }
        earlier.sort_unstable();
        earlier.dedup();
        if earlier.contains(&x) {
            return Ok(0.0);
        }
        let key = (x, earlier);
        if let Some(&q) = self.q_memo.get(&key) {
            return Ok(q);
        }
        let sketch = self.sketch(x)?;
        let outside = sketch
            .iter()
            .filter(|w| !key.1.iter().any(|&e| w.reach.contains(e)))
            .count();
        let q = if sketch.is_empty() {
            0.0
        } else {
            outside as f64 / sketch.len() as f64
        };
        self.q_memo.insert(key, q);
        Ok(q)
    }

    /// Probability that one trial at frontier `back` rejects its symbol.
    fn rho(&mut self, back: &[usize], f: &Frontier) -> Result<f64> {
        if let Some(&r) = self.rho_memo.get(back) {
            return Ok(r);
        }
        let mut rho = 0.0;
        for pos in 0..f.trans.len() {
            let label = self.nfa.transitions[f.trans[pos]].label;
            let has_rival = (0..pos)
                .any(|p| self.oracle.may_overlap(self.nfa.transitions[f.trans[p]].label, label));
            if !has_rival {
                continue;
            }
            let weight = f.z[pos] / f.total;
            let mean_q = match self.oracle.enumerate(label) {
                Some(items) if !items.is_empty() => {
                    let mut s = 0.0;
                    for a in &items {
                        let c = self.containing(f, a);
                        s += self.q_value(f, pos, &c)?;
                    }
                    s / items.len() as f64
                }
                _ => {
                    let m = checked_count(self.params.rho_trials * weight, self.params.budget, "rejection trials")?;
                    let key: Vec<u32> = back.iter().map(|&b| b as u32).collect();
                    let mut r = self.seed.derive_bytes("rho", &[pos as u64], &key).rng();
                    let mut s = 0.0;
                    for _ in 0..m {
                        let a = self.oracle_sample(label, &mut r)?;
                        let c = self.containing(f, &a);
                        s += self.q_value(f, pos, &c)?;
                    }
                    s / m as f64
                }
            };
            rho += weight * (1.0 - mean_q);
        }
        self.rho_memo.insert(back.to_vec(), rho);
        Ok(rho)
    }

    /// One backward sampling run for a word reaching `x`.
    pub fn sample_from_state(&mut self, x: usize, rng: &mut Rng) -> Result<Draw<Word<O::Item>>> {
        let nx = self.estimate(x)?;
        if nx == 0.0 {
            return Ok(Draw::Empty);
        }
        let mut back = vec![x];
        let mut rev: Vec<O::Item> = Vec::new();
        let mut q = 1.0f64;
        let cap = self.params.cap;
        let mut iters = 0f64;
        while self.nfa.level[back[0]] > 0 {
            let f = self.frontier(&back)?;
            if f.trans.is_empty() {
                return Err(Error::Fail("empty frontier below a nonempty state".into()));
            }
            loop {
                iters += 1.0;
                if iters > cap {
                    self.stats.cap_hits += 1;
                    self.stats.fails += 1;
                    return Ok(Draw::Fail);
                }
                let pos = weighted_index(rng, &f.z).expect("positive frontier weights");
                let label = self.nfa.transitions[f.trans[pos]].label;
                let a = self.oracle_sample(label, rng)?;
                let c = self.containing(&f, &a);
                let qa = self.q_value(&f, pos, &c)?;
                if rng.random::<f64>() >= qa {
                    continue;
                }
                let rho = self.rho(&back, &f)?;
                let mut num = 0.0;
                for &p in &c {
                    let src = self.nfa.transitions[f.trans[p]].from;
                    num += self.estimate(src)? / f.total * self.q_value(&f, p, &c)?;
                }
                q *= num / (1.0 - rho).max(f64::MIN_POSITIVE);
                let mut next: Vec<usize> = c
                    .iter()
                    .map(|&p| self.nfa.transitions[f.trans[p]].from)
                    .collect();
                next.sort_unstable();
                next.dedup();
                back = next;
                rev.push(a);
                break;
            }
        }
        let mut p = 1.0 / (2.0 * q * nx);
        if p > 1.0 {
            self.stats.clamps += 1;
            p = 1.0;
        }
        if rng.random::<f64>() < p {
            rev.reverse();
            let reach = self.nfa.reach(self.oracle, &rev);
            assert!(reach.contains(x), "sampled word does not reach its state");
            Ok(Draw::Sample(Word { items: rev, reach }))
        } else {
            self.stats.fails += 1;
            Ok(Draw::Fail)
        }
    }

    /// A word of the final state's language, retrying up to `retries` times.
    pub fn sample_word(&mut self, rng: &mut Rng, retries: usize) -> Result<Draw<Vec<O::Item>>> {
        if self.nfa.k.is_none() {
            return Ok(Draw::Empty);
        }
        for _ in 0..retries.max(1) {
            match self.sample_from_state(self.nfa.final_state, rng)? {
                Draw::Sample(w) => return Ok(Draw::Sample(w.items)),
                Draw::Empty => return Ok(Draw::Empty),
                Draw::Fail => {}
            }
        }
        Ok(Draw::Fail)
    }
}

/// Result of [`count_succinct_nfa`].
#[derive(Clone, Debug)]
pub struct NfaCount {
    pub estimate: f64,
    pub stats: NfaStats,
    /// `|N|` of the pruned unrolled NFA.
    pub size: usize,
}

fn nfa_params<O: LabelOracle>(
    nfa: &Leveled<O::Label>,
    oracle: &O,
    cfg: &Config,
) -> Result<NfaParams> {
    let r = nfa.size();
    let eps0 = oracle.epsilon0();
    match cfg.profile {
        Profile::Theory => {
            if cfg.epsilon <= 100.0 * (r as f64).powi(4) * eps0 {
                return Err(Error::invalid(format!(
                    "theory profile needs epsilon > 100 r^4 eps0 = {:.3e}",
                    100.0 * (r as f64).powi(4) * eps0
                )));
            }
        }
        Profile::Practical => {
            if cfg.epsilon <= eps0 {
                return Err(Error::invalid("epsilon must exceed the oracle error"));
            }
        }
    }
    let log2_n: f64 = {
        let per = nfa
            .transitions
            .iter()
            .map(|t| oracle.log2_size_bound(t.label))
            .fold(0.0f64, f64::max);
        per * nfa.k.unwrap_or(0) as f64 + (r as f64).log2() * nfa.k.unwrap_or(0) as f64
    };
    Ok(NfaParams::new(cfg, cfg.epsilon, r, log2_n))
}

/// `Ñ = (1 ± ε)|L_k(N)|`, unrolling the NFA first.
pub fn count_succinct_nfa<O: LabelOracle>(
    nfa: &SuccinctNfa<O::Label>,
    k: usize,
    oracle: &O,
    cfg: &Config,
) -> Result<NfaCount> {
    cfg.validate()?;
    let un = unroll_nfa(nfa, k)?;
    let lv = Leveled::new(&un)?;
    let params = nfa_params(&lv, oracle, cfg)?;
    let mut est = NfaEstimator::new(&lv, oracle, params, Seed::from_u64(cfg.seed).derive("nfa", &[]));
    let estimate = est.count()?;
    Ok(NfaCount {
        estimate,
        stats: est.stats,
        size: lv.size(),
    })
}

/// Draws `count` words of `L_k(N)`, each retried up to three times.
pub fn sample_words<O: LabelOracle>(
    nfa: &SuccinctNfa<O::Label>,
    k: usize,
    oracle: &O,
    cfg: &Config,
    count: usize,
) -> Result<(Vec<Draw<Vec<O::Item>>>, NfaStats)> {
    cfg.validate()?;
    let un = unroll_nfa(nfa, k)?;
    let lv = Leveled::new(&un)?;
    let params = nfa_params(&lv, oracle, cfg)?;
    let root = Seed::from_u64(cfg.seed);
    let mut est = NfaEstimator::new(&lv, oracle, params, root.derive("nfa", &[]));
    est.count()?;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = root.derive("word", &[i as u64]).rng();
        out.push(est.sample_word(&mut rng, 3)?);
    }
    Ok((out, est.stats))
}

/// Explicit finite label sets over interned symbols.
#[derive(Clone, Debug, Default)]
pub struct ExplicitOracle {
    pub symbols: Alphabet,
    /// Sorted, deduplicated symbol ids per label.
    pub sets: Vec<Vec<u32>>,
}

impl ExplicitOracle {
    /// Registers a label set and returns its handle.
    pub fn label(&mut self, names: &[&str]) -> usize {
        let mut v: Vec<u32> = names.iter().map(|n| self.symbols.intern(n).0).collect();
        v.sort_unstable();
        v.dedup();
        if let Some(i) = self.sets.iter().position(|s| *s == v) {
            return i;
        }
        self.sets.push(v);
        self.sets.len() - 1
    }

    pub fn word_text(&self, word: &[u32]) -> Vec<String> {
        word.iter()
            .map(|&a| self.symbols.name(crate::tree::Symbol(a)).to_string())
            .collect()
    }
}

impl LabelOracle for ExplicitOracle {
    type Label = usize;
    type Item = u32;

    fn contains(&self, label: usize, item: &u32) -> bool {
        self.sets[label].binary_search(item).is_ok()
    }

    fn approx_size(&self, label: usize) -> f64 {
        self.sets[label].len() as f64
    }

    fn sample(&self, label: usize, rng: &mut Rng) -> Option<u32> {
        let s = &self.sets[label];
        (!s.is_empty()).then(|| s[rng.random_range(0..s.len())])
    }

    fn may_overlap(&self, a: usize, b: usize) -> bool {
        let (x, y) = (&self.sets[a], &self.sets[b]);
        let (mut i, mut j) = (0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    fn enumerate(&self, label: usize) -> Option<Vec<u32>> {
        Some(self.sets[label].clone())
    }

    fn log2_size_bound(&self, label: usize) -> f64 {
        (self.sets[label].len().max(1) as f64).log2()
    }

    fn epsilon0(&self) -> f64 {
        0.0
    }
}

/// Parses `{"states": [..], "initial": s, "final": s, "transitions":
/// [{"from": s, "to": s, "label": [..]}]}`.
pub fn parse_explicit_nfa(v: &Value) -> Result<(SuccinctNfa<usize>, ExplicitOracle)> {
    let obj = v.as_object().ok_or_else(|| Error::invalid("NFA must be a JSON object"))?;
    let states: Vec<String> = obj
        .get("states")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::invalid("missing `states` array"))?
        .iter()
        .map(|s| {
            s.as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::invalid("state names must be strings"))
        })
        .collect::<Result<_>>()?;
    let mut seen = std::collections::HashSet::new();
    for s in &states {
        if !seen.insert(s) {
            return Err(Error::invalid(format!("duplicate state `{s}`")));
        }
    }
    let find = |key: &str, val: Option<&Value>| -> Result<usize> {
        let name = val
            .and_then(Value::as_str)
            .ok_or_else(|| Error::invalid(format!("missing `{key}`")))?;
        states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::invalid(format!("undeclared state `{name}`")))
    };
    let initial = find("initial", obj.get("initial"))?;
    let final_state = find("final", obj.get("final"))?;
    let mut oracle = ExplicitOracle::default();
    let mut transitions = Vec::new();
    for t in obj
        .get("transitions")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::invalid("missing `transitions` array"))?
    {
        let from = find("from", t.get("from"))?;
        let to = find("to", t.get("to"))?;
        let names: Vec<&str> = t
            .get("label")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::invalid("transition needs a `label` array"))?
            .iter()
            .map(|x| x.as_str().ok_or_else(|| Error::invalid("label elements must be strings")))
            .collect::<Result<_>>()?;
        let label = oracle.label(&names);
        transitions.push(NfaTransition { from, label, to });
    }
    Ok((SuccinctNfa::new(states, initial, final_state, transitions)?, oracle))
}

pub mod brute {
    //! Exact word counting by subset construction over enumerated labels.

    use super::*;
    use std::collections::BTreeMap;

    /// Exact `|L_k(N)|`. Every label must be enumerable; `budget` bounds
    /// subset-by-letter steps.
    pub fn brute_nfa_count<O: LabelOracle>(
        nfa: &SuccinctNfa<O::Label>,
        k: usize,
        oracle: &O,
        budget: u64,
    ) -> Result<BigUint> {
        let mut letters: Vec<O::Item> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut sets: HashMap<O::Label, Vec<O::Item>> = HashMap::new();
        for t in &nfa.transitions {
            if sets.contains_key(&t.label) {
                continue;
            }
            let items = oracle
                .enumerate(t.label)
                .ok_or_else(|| Error::invalid("brute-force counting needs enumerable labels"))?;
            for a in &items {
                if seen.insert(a.clone()) {
                    letters.push(a.clone());
                }
            }
            sets.insert(t.label, items);
        }
        let ns = nfa.states.len();
        let mut cur: BTreeMap<Vec<usize>, BigUint> = BTreeMap::new();
        cur.insert(vec![nfa.initial], BigUint::one());
        let mut used = 0u64;
        for _ in 0..k {
            let mut next: BTreeMap<Vec<usize>, BigUint> = BTreeMap::new();
            for (set, w) in &cur {
                let mut member = FixedBitSet::with_capacity(ns);
                for &s in set {
                    member.insert(s);
                }
                for a in &letters {
                    used += 1;
                    if used > budget {
                        return Err(Error::Budget(format!(
                            "exact word counting needs more than {budget} steps"
                        )));
                    }
                    let mut to: Vec<usize> = nfa
                        .transitions
                        .iter()
                        .filter(|t| member.contains(t.from) && oracle.contains(t.label, a))
                        .map(|t| t.to)
                        .collect();
                    if to.is_empty() {
                        continue;
                    }
                    to.sort_unstable();
                    to.dedup();
                    *next.entry(to).or_insert_with(BigUint::zero) += w;
                }
            }
            cur = next;
        }
        Ok(cur
            .into_iter()
            .filter(|(set, _)| set.contains(&nfa.final_state))
            .map(|(_, w)| w)
            .sum())
    }

    /// All words of `L_k(N)` over enumerated labels, sorted.
    pub fn brute_nfa_words<O: LabelOracle>(
        nfa: &SuccinctNfa<O::Label>,
        k: usize,
        oracle: &O,
        budget: u64,
    ) -> Result<Vec<Vec<O::Item>>>
    where
        O::Item: Ord,
    {
        let mut letters: Vec<O::Item> = Vec::new();
        for t in &nfa.transitions {
            for a in oracle
                .enumerate(t.label)
                .ok_or_else(|| Error::invalid("brute-force enumeration needs enumerable labels"))?
            {
                letters.push(a);
            }
        }
        letters.sort();
        letters.dedup();
        let mut out = Vec::new();
        let mut used = 0u64;
        let mut word = Vec::new();
        fn go<O: LabelOracle>(
            nfa: &SuccinctNfa<O::Label>,
            oracle: &O,
            letters: &[O::Item],
            k: usize,
            cur: Vec<usize>,
            word: &mut Vec<O::Item>,
            out: &mut Vec<Vec<O::Item>>,
            used: &mut u64,
            budget: u64,
        ) -> Result<()> {
            if word.len() == k {
                if cur.contains(&nfa.final_state) {
                    out.push(word.clone());
                }
                return Ok(());
            }
            for a in letters {
                *used += 1;
                if *used > budget {
                    return Err(Error::Budget(format!("word enumeration exceeds {budget} steps")));
                }
                let mut next: Vec<usize> = nfa
                    .transitions
                    .iter()
                    .filter(|t| cur.contains(&t.from) && oracle.contains(t.label, a))
                    .map(|t| t.to)
                    .collect();
                if next.is_empty() {
                    continue;
                }
                next.sort_unstable();
                next.dedup();
                word.push(a.clone());
                go(nfa, oracle, letters, k, next, word, out, used, budget)?;
                word.pop();
            }
            Ok(())
        }
        go(nfa, oracle, &letters, k, vec![nfa.initial], &mut word, &mut out, &mut used, budget)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::brute::*;
    use super::*;

    fn chain() -> (SuccinctNfa<usize>, ExplicitOracle) {
        let mut o = ExplicitOracle::default();
        let ab = o.label(&["a", "b"]);
        let bc = o.label(&["b", "c"]);
        let nfa = SuccinctNfa::new(
            vec!["p".into(), "q".into(), "f".into()],
            0,
            2,
            vec![
                NfaTransition { from: 0, label: ab, to: 1 },
                NfaTransition { from: 1, label: bc, to: 2 },
            ],
        )
        .unwrap();
        (nfa, o)
    }

    #[test]
    fn membership_on_chain() {
        let (nfa, o) = chain();
        let w = |s: &str| -> Vec<u32> { s.chars().map(|c| o.symbols.get(&c.to_string()).unwrap().0).collect() };
        assert!(nfa.word_membership(&o, 2, &w("ab")));
        assert!(!nfa.word_membership(&o, 2, &w("ca")));
        assert_eq!(brute_nfa_count(&nfa, 2, &o, 1000).unwrap(), BigUint::from(4u32));
    }

    #[test]
    fn chain_count_is_exact_without_overlap() {
        let (nfa, o) = chain();
        let c = count_succinct_nfa(&nfa, 2, &o, &Config::default()).unwrap();
        assert_eq!(c.estimate, 4.0);
    }

    #[test]
    fn unrolling_a_cycle() {
        let mut o = ExplicitOracle::default();
        let a = o.label(&["a"]);
        let b = o.label(&["a", "b"]);
        let nfa = SuccinctNfa::new(
            vec!["x".into(), "y".into()],
            0,
            1,
            vec![
                NfaTransition { from: 0, label: a, to: 1 },
                NfaTransition { from: 1, label: b, to: 0 },
                NfaTransition { from: 1, label: a, to: 1 },
            ],
        )
        .unwrap();
        let un = unroll_nfa(&nfa, 3).unwrap();
        for k in 1..=3 {
            let u = unroll_nfa(&nfa, k).unwrap();
            assert_eq!(
                brute_nfa_count(&u, k, &o, 100_000).unwrap(),
                brute_nfa_count(&nfa, k, &o, 100_000).unwrap()
            );
        }
        let lv = Leveled::new(&un).unwrap();
        assert_eq!(lv.k, Some(3));
        assert!(Leveled::new(&nfa).is_err());
    }

    #[test]
    fn disconnected_final_counts_zero() {
        let mut o = ExplicitOracle::default();
        let a = o.label(&["a"]);
        let nfa = SuccinctNfa::new(
            vec!["x".into(), "y".into(), "z".into()],
            0,
            2,
            vec![NfaTransition { from: 0, label: a, to: 1 }],
        )
        .unwrap();
        assert_eq!(count_succinct_nfa(&nfa, 1, &o, &Config::default()).unwrap().estimate, 0.0);
        let (draws, _) = sample_words(&nfa, 1, &o, &Config::default(), 3).unwrap();
        assert!(draws.iter().all(|d| *d == Draw::Empty));
    }

    #[test]
    fn overlapping_diamond_is_close() {
        let mut o = ExplicitOracle::default();
        let l1 = o.label(&["a", "b", "c"]);
        let l2 = o.label(&["b", "c", "d"]);
        let l3 = o.label(&["a", "b"]);
        let nfa = SuccinctNfa::new(
            vec!["s".into(), "u".into(), "v".into(), "f".into()],
            0,
            3,
            vec![
                NfaTransition { from: 0, label: l1, to: 1 },
                NfaTransition { from: 0, label: l2, to: 2 },
                NfaTransition { from: 1, label: l3, to: 3 },
                NfaTransition { from: 2, label: l3, to: 3 },
            ],
        )
        .unwrap();
        let exact = brute_nfa_count(&nfa, 2, &o, 10_000).unwrap();
        assert_eq!(exact, BigUint::from(8u32));
        let mut good = 0;
        for seed in 0..50 {
            let c = count_succinct_nfa(&nfa, 2, &o, &Config::new(0.2, 0.1, seed)).unwrap();
            if (c.estimate - 8.0).abs() <= 0.2 * 8.0 {
                good += 1;
            }
        }
        assert!(good >= 45, "{good}/50");
    }
}
