//! Seed derivation.
//!
//! One root seed is expanded into independent ChaCha streams keyed by a
//! task label and a tuple of integers, so every randomized sub-task draws
//! from its own stream regardless of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Seed([u8; 32]);

impl Seed {
    pub fn from_u64(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"taru/root");
        h.update(seed.to_le_bytes());
        Seed(h.finalize().into())
    }

    /// Derives a child seed from a task label and integer coordinates.
    pub fn derive(&self, tag: &str, parts: &[u64]) -> Seed {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update((tag.len() as u64).to_le_bytes());
        h.update(tag.as_bytes());
        for p in parts {
            h.update(p.to_le_bytes());
        }
        Seed(h.finalize().into())
    }

    /// Derives a child seed keyed additionally by an arbitrary byte string.
    pub fn derive_bytes(&self, tag: &str, parts: &[u64], bytes: &[u32]) -> Seed {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update((tag.len() as u64).to_le_bytes());
        h.update(tag.as_bytes());
        for p in parts {
            h.update(p.to_le_bytes());
        }
        h.update((bytes.len() as u64).to_le_bytes());
        for b in bytes {
            h.update(b.to_le_bytes());
        }
        Seed(h.finalize().into())
    }

    pub fn rng(&self) -> Rng {
        ChaCha8Rng::from_seed(self.0)
    }
}

/// Draws an index in `0..n` with probability proportional to `weights`.
/// Returns `None` when the total weight is zero.
pub fn weighted_index<R: rand::Rng>(rng: &mut R, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut x = rng.random::<f64>() * total;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if x < w {
                return Some(i);
            }
            x -= w;
            last = Some(i);
        }
    }
    last
}
