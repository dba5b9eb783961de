//! Counting problems that reduce to tree-automaton counting.

pub mod dnnf;
pub mod ecsp;
pub mod nwa;
