//! Level-by-level estimation of `|L_n(T)|` for binary automata.
//!
//! Round `i` estimates `Ñ(s^i)` for every state from the estimates of lower
//! levels and from sketches, multisets of near-uniform trees. Sketches are
//! grouped in epochs: epoch `e` holds levels `1..e−1`, its elements at level
//! `j` are produced by the tree sampler reading epoch `e−1`, and round `i`
//! reads epoch `i`. Sketches are virtual: element `idx` of `(e, s, j)` is
//! generated on first use from its own derived seed, so only the elements
//! actually drawn are ever computed.

use crate::automaton::TreeAutomaton;
use crate::config::{checked_count, Config, Profile};
use crate::encode::{encode_binary, AT};
use crate::error::{Error, Result};
use crate::nfa::{Draw, LabelOracle, Leveled, NfaEstimator, NfaParams, NfaStats};
use crate::partial::{PartialTree, Token};
use crate::partition::{
    build_partition_nfa, labels_may_overlap, letter_in, log2_tree_bound, Letter, PLabel, SketchTree,
};
use crate::rng::{weighted_index, Rng, Seed};
use crate::tree::Symbol;
use crate::unroll::Unrolled;
use rand::Rng as _;
use serde_json::{json, Value};
use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

/// Resolved sizes and accuracies of one engine.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineParams {
    /// Accuracy after the theory-profile clamp.
    pub epsilon: f64,
    pub delta: f64,
    pub profile: Profile,
    /// Virtual sketch size `α`.
    pub alpha: u64,
    /// Overlap trials per leveled transition (real-valued; see `budget`).
    pub trials: f64,
    /// Attempts per sketch element.
    pub elem_cap: usize,
    /// Accuracy requested from partition NFAs.
    pub nfa_epsilon: f64,
    /// Error attributed to tree-label oracles.
    pub oracle_epsilon: f64,
    pub budget: u64,
}

impl EngineParams {
    pub fn new(cfg: &Config, n: usize, m: usize, states: usize) -> Self {
        let (n_f, m_f) = (n.max(1) as f64, m.max(1) as f64);
        let delta = cfg.delta;
        let (epsilon, alpha, trials, nfa_epsilon, oracle_epsilon) = match cfg.profile {
            Profile::Theory => {
                let eps = cfg.epsilon.min((4.0 * m_f * n_f).powi(-18));
                let l = (1.0 / delta).ln();
                let alpha = l * l * (n_f * m_f).powi(13) / eps.powi(5);
                let h = ((4.0 * m_f / delta).ln() * m_f * m_f / (eps * eps)).ceil();
                (eps, alpha, 5.0 * h, (4.0 * n_f * m_f).powi(17) * eps, n_f * eps)
            }
            Profile::Practical => {
                let eps = cfg.epsilon;
                let alpha = cfg.c_sketch * (n_f * m_f / (eps * eps)).ceil();
                let h = cfg.c_trials * ((m_f / delta).ln() / (eps * eps)).ceil();
                (eps, alpha, h, eps, eps / 4.0)
            }
        };
        let alpha = if alpha.is_finite() && alpha < u64::MAX as f64 {
            (alpha.ceil() as u64).max(1)
        } else {
            u64::MAX
        };
        let elem_cap = ((alpha as f64 * states.max(1) as f64 * n_f * n_f / delta).ln()
            / (4.0f64 / 3.0).ln())
        .ceil() as usize;
        EngineParams {
            epsilon,
            delta,
            profile: cfg.profile,
            alpha,
            trials,
            elem_cap: elem_cap.max(3),
            nfa_epsilon,
            oracle_epsilon,
            budget: cfg.budget,
        }
    }
}

/// Counters collected while running an engine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EngineStats {
    /// Tree-sampler runs.
    pub sample_runs: u64,
    /// Tree-sampler runs ending in FAIL.
    pub sample_fails: u64,
    /// Tree-sampler acceptance probabilities clamped to 1.
    pub clamps: u64,
    /// Sketch elements materialized.
    pub elements: u64,
    /// Partition estimates computed (memo misses).
    pub partitions: u64,
    /// Partition estimates served from the memo.
    pub partition_hits: u64,
    pub nfa: NfaStats,
}

impl EngineStats {
    pub fn to_json(&self) -> Value {
        json!({
            "sample_runs": self.sample_runs,
            "sample_fails": self.sample_fails,
            "clamps": self.clamps,
            "elements": self.elements,
            "partitions": self.partitions,
            "partition_hits": self.partition_hits,
            "nfa_clamps": self.nfa.clamps,
            "nfa_cap_hits": self.nfa.cap_hits,
            "nfa_fails": self.nfa.fails,
        })
    }
}

/// Provenance of an estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub profile: Profile,
    pub method: &'static str,
}

impl Certificate {
    pub fn to_json(&self) -> Value {
        json!({
            "epsilon": self.epsilon,
            "delta": self.delta,
            "seed": self.seed,
            "profile": self.profile.name(),
            "method": self.method,
        })
    }
}

/// An estimate with its certificate and diagnostics.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub value: f64,
    pub certificate: Certificate,
    pub stats: EngineStats,
}

type ElemKey = (u32, u32, u32, u64);
type PartKey = (u32, u32, u32, Vec<u32>);

/// The estimator state: level estimates plus lazily filled sketches.
pub struct Engine {
    pub unrolled: Unrolled,
    pub n: usize,
    pub config: Config,
    pub params: EngineParams,
    root: Seed,
    /// `est[i][s] = Ñ(s^i)` for the levels computed so far.
    est: Vec<Vec<f64>>,
    leaf_syms: Vec<Symbol>,
    node_syms: Vec<Symbol>,
    elements: RefCell<HashMap<ElemKey, Rc<SketchTree>>>,
    memo: RefCell<HashMap<PartKey, f64>>,
    stats: RefCell<EngineStats>,
}

impl Engine {
    /// Sets up an engine for `L_n` of a binary automaton without running it.
    pub fn new(a: &TreeAutomaton, n: usize, cfg: &Config) -> Result<Self> {
        cfg.validate()?;
        let unrolled = Unrolled::new(a, n)?;
        let params = EngineParams::new(cfg, n, a.size(), a.num_states());
        let mut leaf_syms: Vec<Symbol> = Vec::new();
        let mut node_syms: Vec<Symbol> = Vec::new();
        for t in &a.transitions {
            if t.children.is_empty() {
                leaf_syms.push(t.symbol);
            } else {
                node_syms.push(t.symbol);
            }
        }
        leaf_syms.sort();
        leaf_syms.dedup();
        node_syms.sort();
        node_syms.dedup();
        Ok(Engine {
            unrolled,
            n,
            config: cfg.clone(),
            params,
            root: Seed::from_u64(cfg.seed),
            est: vec![vec![0.0; a.num_states()]],
            leaf_syms,
            node_syms,
            elements: RefCell::new(HashMap::new()),
            memo: RefCell::new(HashMap::new()),
            stats: RefCell::new(EngineStats::default()),
        })
    }

    /// Runs every round up to level `n`.
    pub fn run(a: &TreeAutomaton, n: usize, cfg: &Config) -> Result<Self> {
        let mut e = Engine::new(a, n, cfg)?;
        while e.levels_done() < n {
            e.estimate_level(e.levels_done() + 1)?;
        }
        Ok(e)
    }

    pub fn base(&self) -> &TreeAutomaton {
        &self.unrolled.base
    }

    pub fn levels_done(&self) -> usize {
        self.est.len() - 1
    }

    /// `Ñ(s^i)` for a computed level.
    pub fn level_estimate(&self, s: usize, i: usize) -> f64 {
        self.est[i][s]
    }

    /// `Ñ(s_init^n)`.
    pub fn estimate(&self) -> f64 {
        self.est[self.n][self.base().initial]
    }

    pub fn stats(&self) -> EngineStats {
        *self.stats.borrow()
    }

    /// Computes `Ñ(s^i)` for every state; levels below `i` must be done.
    pub fn estimate_level(&mut self, i: usize) -> Result<()> {
        if i != self.levels_done() + 1 || i > self.n {
            return Err(Error::invalid("levels must be estimated in order"));
        }
        let ns = self.unrolled.num_states();
        let mut row = vec![0.0; ns];
        if i == 1 {
            for (s, v) in row.iter_mut().enumerate() {
                *v = self.unrolled.level1_exact(s) as f64;
            }
        } else {
            for (s, v) in row.iter_mut().enumerate() {
                *v = self.estimate_state(s, i)?;
            }
        }
        self.est.push(row);
        Ok(())
    }

    fn estimate_state(&self, s: usize, i: usize) -> Result<f64> {
        let ts = self.unrolled.leveled(s, i);
        let mut live: Vec<usize> = Vec::new();
        let mut total = 0.0;
        for (pos, t) in ts.iter().enumerate() {
            let nt = self.est[t.left_size][t.left] * self.est[t.right_size][t.right];
            if nt == 0.0 {
                continue;
            }
            let rivals: Vec<usize> = live
                .iter()
                .copied()
                .filter(|&r| ts[r].symbol == t.symbol && ts[r].left_size == t.left_size)
                .collect();
            let p = if rivals.is_empty() {
                1.0
            } else {
                let h = checked_count(self.params.trials, self.params.budget, "overlap trials")?;
                let mut rng = self.root.derive("level", &[i as u64, s as u64, pos as u64]).rng();
                let mut misses = 0usize;
                for _ in 0..h {
                    let l = self.draw(i, t.left, t.left_size, &mut rng)?;
                    let r = self.draw(i, t.right, t.right_size, &mut rng)?;
                    let hit = rivals.iter().any(|&x| {
                        l.states.contains(ts[x].left) && r.states.contains(ts[x].right)
                    });
                    if !hit {
                        misses += 1;
                    }
                }
                misses as f64 / h as f64
            };
            live.push(pos);
            total += nt * p;
        }
        Ok(total)
    }

    /// A uniformly chosen element of sketch `(epoch, s, j)`.
    pub fn draw(&self, epoch: usize, s: usize, j: usize, rng: &mut Rng) -> Result<Rc<SketchTree>> {
        let idx = if self.params.alpha == u64::MAX {
            rng.random::<u64>()
        } else {
            rng.random_range(0..self.params.alpha)
        };
        self.element(epoch, s, j, idx)
    }

    /// Element `idx` of sketch `(epoch, s, j)`, generated on first use.
    pub fn element(&self, epoch: usize, s: usize, j: usize, idx: u64) -> Result<Rc<SketchTree>> {
        if j == 0 || j >= epoch || epoch > self.n.max(1) + 1 || j > self.levels_done() {
            return Err(Error::invalid(format!("no sketch for level {j} in epoch {epoch}")));
        }
        let key = (epoch as u32, s as u32, j as u32, idx);
        if let Some(t) = self.elements.borrow().get(&key) {
            return Ok(t.clone());
        }
        if self.est[j][s] == 0.0 {
            return Err(Error::invalid("sketch of an empty language"));
        }
        let seed = self.root.derive("elem", &[epoch as u64, s as u64, j as u64, idx]);
        let mut rng = seed.rng();
        let mut found = None;
        for _ in 0..self.params.elem_cap {
            match self.sample_tree(s, j, epoch - 1, &mut rng)? {
                Draw::Sample(t) => {
                    found = Some(t);
                    break;
                }
                Draw::Fail => continue,
                Draw::Empty => break,
            }
        }
        let t = found.ok_or_else(|| {
            Error::Fail(format!(
                "could not fill a sketch element for state `{}` at level {j}",
                self.base().states[s]
            ))
        })?;
        assert!(
            t.size() == j && t.states.contains(s),
            "sketch element is not accepted from its state and level"
        );
        self.stats.borrow_mut().elements += 1;
        self.elements.borrow_mut().insert(key, t.clone());
        Ok(t)
    }

    /// One run of the tree sampler for `T(s^i)` reading sketches of `epoch`.
    pub fn sample_tree(&self, s: usize, i: usize, epoch: usize, rng: &mut Rng) -> Result<Draw<Rc<SketchTree>>> {
        if i > self.levels_done() {
            return Err(Error::invalid("level not estimated yet"));
        }
        let ni = self.est[i][s];
        if ni == 0.0 {
            return Ok(Draw::Empty);
        }
        self.stats.borrow_mut().sample_runs += 1;
        let base = self.base();
        if i == 1 {
            let syms = self.unrolled.leaf_symbols(s);
            let a = syms[rng.random_range(0..syms.len())];
            return Ok(Draw::Sample(Rc::new(SketchTree::new(base, crate::tree::Tree::leaf(a)))));
        }
        let mut t = PartialTree::hole(i);
        let mut phi = 1.0f64;
        while !t.is_complete() {
            let u = t.min_hole()?;
            let syms = match t.token(u) {
                Token::Hole(1) => &self.leaf_syms,
                _ => &self.node_syms,
            };
            let exts = t.immediate_extensions(u, syms);
            if exts.len() == 1 {
                t = exts.into_iter().next().unwrap().1;
                continue;
            }
            let mut weights = Vec::with_capacity(exts.len());
            for (_, e) in &exts {
                weights.push(self.estimate_partition(e, s, i, epoch)?);
            }
            let Some(k) = weighted_index(rng, &weights) else {
                self.stats.borrow_mut().sample_fails += 1;
                return Ok(Draw::Fail);
            };
            let total: f64 = weights.iter().sum();
            phi *= weights[k] / total;
            t = exts.into_iter().nth(k).unwrap().1;
        }
        let tree = t.to_tree().expect("complete partial tree");
        let st = SketchTree::new(base, tree);
        assert!(st.states.contains(s), "sampled tree is not accepted from its state");
        let mut p = 1.0 / (2.0 * phi * ni);
        if p > 1.0 {
            self.stats.borrow_mut().clamps += 1;
            p = 1.0;
        }
        if rng.random::<f64>() < p {
            Ok(Draw::Sample(Rc::new(st)))
        } else {
            self.stats.borrow_mut().sample_fails += 1;
            Ok(Draw::Fail)
        }
    }

    /// `Ñ(s^i, t)`: the estimated number of completions of `t` accepted
    /// from `s`, using sketches of `epoch`.
    pub fn estimate_partition(&self, t: &PartialTree, s: usize, i: usize, epoch: usize) -> Result<f64> {
        if t.full_size() != i {
            return Err(Error::invalid("partial tree size differs from the level"));
        }
        if t.is_complete() {
            let tree = t.to_tree().expect("complete");
            return Ok(if self.base().state_set(&tree).contains(s) { 1.0 } else { 0.0 });
        }
        if t.len() == 1 {
            return Ok(self.est[i][s]);
        }
        let key = (epoch as u32, s as u32, i as u32, t.key().to_vec());
        if let Some(&v) = self.memo.borrow().get(&key) {
            self.stats.borrow_mut().partition_hits += 1;
            return Ok(v);
        }
        let pn = build_partition_nfa(self.base(), t, s, i)?;
        let lv = Leveled::new(&pn.nfa)?;
        let oracle = TreeOracle { engine: self, epoch };
        let r = lv.size();
        let log2_n = pn
            .path
            .hole_sizes
            .iter()
            .map(|&h| log2_tree_bound(h, self.base().alphabet.len()))
            .sum::<f64>();
        let params = NfaParams::new(&self.config, self.params.nfa_epsilon, r, log2_n);
        let seed = self.root.derive_bytes("part", &[epoch as u64, s as u64, i as u64], t.key());
        let mut est = NfaEstimator::new(&lv, &oracle, params, seed);
        let v = est.count()?;
        {
            let mut st = self.stats.borrow_mut();
            st.partitions += 1;
            st.nfa.add(&est.stats);
        }
        self.memo.borrow_mut().insert(key, v);
        Ok(v)
    }
}

/// Tree-language labels answered from an engine's estimates and sketches.
pub struct TreeOracle<'e> {
    pub engine: &'e Engine,
    pub epoch: usize,
}

impl LabelOracle for TreeOracle<'_> {
    type Label = PLabel;
    type Item = Letter;

    fn contains(&self, label: PLabel, item: &Letter) -> bool {
        letter_in(label, item)
    }

    fn approx_size(&self, label: PLabel) -> f64 {
        match label {
            PLabel::Amp => 1.0,
            PLabel::Trees { state, size } => self.engine.est[size as usize][state as usize],
        }
    }

    fn sample(&self, label: PLabel, rng: &mut Rng) -> Option<Letter> {
        match label {
            PLabel::Amp => Some(Letter::Amp),
            PLabel::Trees { state, size } => self
                .engine
                .draw(self.epoch, state as usize, size as usize, rng)
                .ok()
                .map(Letter::Tree),
        }
    }

    fn may_overlap(&self, a: PLabel, b: PLabel) -> bool {
        labels_may_overlap(a, b)
    }

    fn enumerate(&self, label: PLabel) -> Option<Vec<Letter>> {
        matches!(label, PLabel::Amp).then(|| vec![Letter::Amp])
    }

    fn log2_size_bound(&self, label: PLabel) -> f64 {
        match label {
            PLabel::Amp => 0.0,
            PLabel::Trees { size, .. } => {
                log2_tree_bound(size as usize, self.engine.base().alphabet.len())
            }
        }
    }

    fn epsilon0(&self) -> f64 {
        self.engine.params.oracle_epsilon
    }
}

/// Binary trees have odd size; every even slice is empty.
fn trivially_empty(a: &TreeAutomaton, n: usize) -> bool {
    n.is_multiple_of(2) || a.transitions.iter().all(|t| t.from != a.initial) || a.transitions.is_empty()
}

/// `Ñ ≈ |L_n(T)|` for a binary automaton. The engine, kept for sampling,
/// is `None` when the answer is known to be zero without estimation.
pub fn fpras_bta_engine(a: &TreeAutomaton, n: usize, cfg: &Config) -> Result<(Estimate, Option<Engine>)> {
    cfg.validate()?;
    if !a.is_binary() {
        return Err(Error::invalid("expected a binary automaton; use the k-ary entry point"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let cert = |eps: f64| Certificate {
        epsilon: eps,
        delta: cfg.delta,
        seed: cfg.seed,
        profile: cfg.profile,
        method: "fpras",
    };
    if trivially_empty(a, n) {
        return Ok((
            Estimate {
                value: 0.0,
                certificate: cert(EngineParams::new(cfg, n, a.size(), a.num_states()).epsilon),
                stats: EngineStats::default(),
            },
            None,
        ));
    }
    let e = Engine::run(a, n, cfg)?;
    Ok((
        Estimate {
            value: e.estimate(),
            certificate: cert(e.params.epsilon),
            stats: e.stats(),
        },
        Some(e),
    ))
}

/// `Ñ ≈ |L_n(T)|` for a binary automaton.
pub fn fpras_bta(a: &TreeAutomaton, n: usize, cfg: &Config) -> Result<Estimate> {
    Ok(fpras_bta_engine(a, n, cfg)?.0)
}

/// `Ñ ≈ |L_n(T)|` for an automaton of any arity, through the binary
/// encoding at size `2n − 1`.
pub fn fpras_ta(a: &TreeAutomaton, n: usize, cfg: &Config) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let b = encode_binary(a)?;
    debug_assert!(b.alphabet.get(AT).is_some());
    fpras_bta(&b, 2 * n - 1, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn catalan_is_exact_without_overlaps() {
        let a = fixtures::catalan();
        for (n, c) in [(1, 1.0), (3, 1.0), (5, 2.0), (7, 5.0), (9, 14.0)] {
            let e = fpras_bta(&a, n, &Config::default()).unwrap();
            assert_eq!(e.value, c, "n = {n}");
        }
        assert_eq!(fpras_bta(&a, 8, &Config::default()).unwrap().value, 0.0);
    }

    #[test]
    fn double_branch_small_levels() {
        let a = fixtures::double_branch();
        let e = fpras_bta(&a, 7, &Config::new(0.2, 0.1, 3)).unwrap();
        assert!((e.value - 1.0).abs() <= 0.2, "{}", e.value);
        assert_eq!(fpras_bta(&a, 5, &Config::default()).unwrap().value, 0.0);
    }

    #[test]
    fn engine_is_deterministic() {
        let a = fixtures::double_branch();
        let x = fpras_bta(&a, 9, &Config::new(0.2, 0.1, 11)).unwrap().value;
        let y = fpras_bta(&a, 9, &Config::new(0.2, 0.1, 11)).unwrap().value;
        assert_eq!(x, y);
    }
}
