//! Approximate counting and uniform sampling for tree-automaton languages.

pub mod apps;
pub mod automaton;
pub mod config;
pub mod cq;
pub mod encode;
pub mod error;
pub mod fixtures;
pub mod fpras;
pub mod nfa;
pub mod oracles;
pub mod partial;
pub mod partition;
pub mod rng;
pub mod sampler;
pub mod tree;
pub mod unroll;

pub use config::{Config, Profile};
pub use error::{Error, Result};
pub use nfa::Draw;
