//! Uniform sampling from `L_n(T)`.
//!
//! Preprocessing is one run of the counting engine. Each draw then walks a
//! partial tree from a single hole to a complete tree, choosing immediate
//! extensions in proportion to their estimated completion counts, and
//! accepts the result with probability `1/(2φÑ)` where `φ` is the product
//! of the branch probabilities taken.

use crate::automaton::TreeAutomaton;
use crate::config::Config;
use crate::encode::{decode_tree, encode_binary, AT};
use crate::error::{Error, Result};
use crate::fpras::{fpras_bta_engine, Engine, EngineStats, Estimate};
use crate::nfa::Draw;
use crate::rng::Seed;
use crate::tree::{Symbol, Tree};

/// Draws a tree per call after one preprocessing run.
pub struct TreeSampler {
    original: TreeAutomaton,
    n: usize,
    /// `@` when the input went through the binary encoding.
    at: Option<Symbol>,
    engine: Option<Engine>,
    pub preprocessing: Estimate,
    root: Seed,
}

/// Internal retries per draw; three FAIL-prone runs fail together with
/// probability below one half.
pub const DRAW_RETRIES: usize = 3;

/// Preprocesses `L_n(T)` for sampling. Automata that are not binary go
/// through the binary encoding and samples are decoded back.
pub fn sample_language(a: &TreeAutomaton, n: usize, cfg: &Config) -> Result<TreeSampler> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let (bin, n_bin, at) = if a.is_binary() {
        (a.clone(), n, None)
    } else {
        let b = encode_binary(a)?;
        let at = b.alphabet.get(AT);
        (b, 2 * n - 1, at)
    };
    let (preprocessing, engine) = fpras_bta_engine(&bin, n_bin, cfg)?;
    Ok(TreeSampler {
        original: a.clone(),
        n,
        at,
        engine,
        preprocessing,
        root: Seed::from_u64(cfg.seed).derive("draw", &[]),
    })
}

impl TreeSampler {
    /// Draw number `index`; independent streams per index.
    pub fn draw(&self, index: u64) -> Result<Draw<Tree>> {
        let Some(e) = &self.engine else {
            return Ok(Draw::Empty);
        };
        if e.estimate() == 0.0 {
            return Ok(Draw::Empty);
        }
        let s = e.base().initial;
        for attempt in 0..DRAW_RETRIES {
            let mut rng = self.root.derive("try", &[index, attempt as u64]).rng();
            match e.sample_tree(s, e.n, e.n, &mut rng)? {
                Draw::Sample(t) => {
                    let tree = match self.at {
                        Some(at) => decode_tree(&t.tree, at)?,
                        None => t.tree.clone(),
                    };
                    assert!(
                        tree.size() == self.n && self.original.accepts(&tree)?,
                        "sampled tree failed the membership post-check"
                    );
                    return Ok(Draw::Sample(tree));
                }
                Draw::Empty => return Ok(Draw::Empty),
                Draw::Fail => {}
            }
        }
        Ok(Draw::Fail)
    }

    /// Draws `0..count`.
    pub fn draws(&self, count: usize) -> Result<Vec<Draw<Tree>>> {
        (0..count as u64).map(|i| self.draw(i)).collect()
    }

    pub fn stats(&self) -> EngineStats {
        self.engine.as_ref().map(Engine::stats).unwrap_or_default()
    }

    pub fn automaton(&self) -> &TreeAutomaton {
        &self.original
    }
}

/// Almost-uniform sampler: `None` (⊥) on an empty slice or after
/// `⌈log2(1/δ)⌉` failed draws starting at `index`.
pub fn fpaus(sampler: &TreeSampler, delta: f64, index: u64) -> Result<Option<Tree>> {
    let tries = (1.0 / delta).log2().ceil().max(1.0) as u64;
    for k in 0..tries {
        match sampler.draw(index.wrapping_mul(tries).wrapping_add(k))? {
            Draw::Sample(t) => return Ok(Some(t)),
            Draw::Empty => return Ok(None),
            Draw::Fail => {}
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracles::brute_slice;
    use std::collections::HashMap;

    #[test]
    fn empty_and_singleton_slices() {
        let a = fixtures::catalan();
        let s = sample_language(&a, 4, &Config::default()).unwrap();
        assert_eq!(s.draw(0).unwrap(), Draw::Empty);
        assert_eq!(fpaus(&s, 0.1, 0).unwrap(), None);
        let c = fixtures::chain();
        let s = sample_language(&c, 7, &Config::default()).unwrap();
        let only = brute_slice(&c, 7, 10_000).unwrap().trees;
        for i in 0..20 {
            if let Draw::Sample(t) = s.draw(i).unwrap() {
                assert_eq!(t, only[0]);
            }
        }
    }

    #[test]
    fn catalan_seven_covers_support() {
        let a = fixtures::catalan();
        let s = sample_language(&a, 7, &Config::new(0.2, 0.1, 5)).unwrap();
        let mut seen: HashMap<Tree, usize> = HashMap::new();
        for d in s.draws(400).unwrap() {
            if let Draw::Sample(t) = d {
                *seen.entry(t).or_default() += 1;
            }
        }
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn k_ary_samples_decode() {
        let a = fixtures::mixed_ternary();
        let s = sample_language(&a, 5, &Config::new(0.2, 0.1, 1)).unwrap();
        let mut got = 0;
        for d in s.draws(20).unwrap() {
            if let Draw::Sample(t) = d {
                assert_eq!(t.size(), 5);
                got += 1;
            }
        }
        assert!(got > 0);
    }
}
