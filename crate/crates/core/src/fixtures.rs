//! Small named automata used by tests, examples and the CLI.

use crate::automaton::{Builder, TreeAutomaton};
use crate::tree::{TextTree, Tree};

/// Unary binary trees accepted when some node has two internal children.
/// States: `s` (initial, witness below), `q` (internal node), `r` (any tree).
pub fn double_branch() -> TreeAutomaton {
    let mut b = Builder::new();
    b.transition("s", "a", &["q", "q"])
        .transition("s", "a", &["s", "r"])
        .transition("s", "a", &["r", "s"])
        .transition("r", "a", &[])
        .transition("r", "a", &["r", "r"])
        .transition("q", "a", &["r", "r"]);
    b.build(2, "s").expect("fixture is well formed")
}

/// A caterpillar of size 9; rejected by [`double_branch`].
pub fn double_branch_rejected() -> Tree {
    let a = double_branch();
    TextTree::parse("a(a,a(a,a(a,a(a,a))))")
        .unwrap()
        .resolve(&a.alphabet)
        .unwrap()
}

/// A tree of size 13 with two runs of [`double_branch`].
pub fn double_branch_ambiguous() -> Tree {
    let a = double_branch();
    TextTree::parse("a(a(a(a,a),a(a,a)),a(a,a(a,a)))")
        .unwrap()
        .resolve(&a.alphabet)
        .unwrap()
}

/// All binary trees over a unary alphabet; slice counts are Catalan numbers.
pub fn catalan() -> TreeAutomaton {
    let mut b = Builder::new();
    b.transition("s", "a", &[]).transition("s", "a", &["s", "s"]);
    b.build(2, "s").expect("fixture is well formed")
}

/// One right-leaning caterpillar per odd size; unambiguous.
pub fn chain() -> TreeAutomaton {
    let mut b = Builder::new();
    b.transition("s", "a", &[])
        .transition("s", "a", &["l", "s"])
        .transition("l", "b", &[]);
    b.build(2, "s").expect("fixture is well formed")
}

/// Two states, leaves `a`/`b` under `q`, and the root `s → a(q,q)`.
/// Its 3-slice has four trees and needs no sampling at any level.
pub fn two_state_small() -> TreeAutomaton {
    let mut b = Builder::new();
    b.transition("s", "a", &["q", "q"])
        .transition("q", "a", &[])
        .transition("q", "b", &[]);
    b.build(2, "s").expect("fixture is well formed")
}

/// Binary trees over `{a, b}` with at least one `b` leaf. Ambiguous.
pub fn some_b_leaf() -> TreeAutomaton {
    let mut b = Builder::new();
    b.transition("s", "b", &[])
        .transition("s", "a", &["s", "r"])
        .transition("s", "a", &["r", "s"])
        .transition("r", "a", &[])
        .transition("r", "b", &[])
        .transition("r", "a", &["r", "r"]);
    b.build(2, "s").expect("fixture is well formed")
}

/// Ternary automaton accepting exactly `a(b,c,d)`.
pub fn single_ternary() -> TreeAutomaton {
    let mut b = Builder::new();
    b.transition("s", "a", &["x", "y", "z"])
        .transition("x", "b", &[])
        .transition("y", "c", &[])
        .transition("z", "d", &[]);
    b.build(3, "s").expect("fixture is well formed")
}

/// Mixed-arity automaton (k = 3): nodes `f` with three children, `g` with
/// one, leaves `a`/`b`; the root must be `f`.
pub fn mixed_ternary() -> TreeAutomaton {
    let mut b = Builder::new();
    b.transition("s", "f", &["t", "t", "t"])
        .transition("t", "f", &["t", "t", "t"])
        .transition("t", "g", &["t"])
        .transition("t", "a", &[])
        .transition("t", "b", &[])
        .transition("s", "g", &["s"]);
    b.build(3, "s").expect("fixture is well formed")
}

/// Unary-alphabet 4-ary automaton accepting every tree of arity at most 4.
pub fn all_quaternary() -> TreeAutomaton {
    let mut b = Builder::new();
    b.transition("s", "a", &[])
        .transition("s", "a", &["s"])
        .transition("s", "a", &["s", "s"])
        .transition("s", "a", &["s", "s", "s"])
        .transition("s", "a", &["s", "s", "s", "s"]);
    b.build(4, "s").expect("fixture is well formed")
}
