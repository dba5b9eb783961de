//! Parsimonious encoding of k-trees and k-ary automata as binary ones.
//!
//! A node `a(t1,…,tk)` becomes the left comb `@(…@(@(a, e1), e2)…, ek)`
//! where `ei` encodes `ti`. Original symbols occur only at leaves and `@`
//! only at internal nodes, so every encoded tree decodes uniquely and a tree
//! of size `n` encodes to a tree of size `2n − 1`.

use crate::automaton::{Transition, TreeAutomaton};
use crate::error::{Error, Result};
use crate::tree::{Symbol, Tree};

/// The extension symbol.
pub const AT: &str = "@";

/// Binary automaton `T'` with `|L_n(T)| = |L_{2n−1}(T')|` for every `n`.
/// Symbol ids of the input alphabet are preserved; `@` is appended.
pub fn encode_binary(a: &TreeAutomaton) -> Result<TreeAutomaton> {
    if a.alphabet.get(AT).is_some() {
        return Err(Error::invalid(
            "alphabet already contains `@`; rename that symbol before encoding",
        ));
    }
    let mut alphabet = a.alphabet.clone();
    let at = alphabet.intern(AT);
    let mut states = a.states.clone();
    let mut transitions = Vec::new();
    for (ti, t) in a.transitions.iter().enumerate() {
        let n = t.children.len();
        if n == 0 {
            transitions.push(t.clone());
            continue;
        }
        // Partial states P(τ,ℓ) for ℓ = 0..n−1 recognise the comb prefixes.
        let base = states.len();
        for l in 0..n {
            states.push(format!("⟨{}:{}:{}⟩", ti, a.states[t.from], l));
        }
        transitions.push(Transition {
            from: base,
            symbol: t.symbol,
            children: vec![],
        });
        for l in 1..n {
            transitions.push(Transition {
                from: base + l,
                symbol: at,
                children: vec![base + l - 1, t.children[l - 1]],
            });
        }
        transitions.push(Transition {
            from: t.from,
            symbol: at,
            children: vec![base + n - 1, t.children[n - 1]],
        });
    }
    TreeAutomaton::new(2, alphabet, states, a.initial, transitions)
}

/// Encodes a k-tree; `at` is the id of `@` in the binary alphabet.
pub fn encode_tree(t: &Tree, at: Symbol) -> Tree {
    let mut acc = Tree::leaf(t.label);
    for c in &t.children {
        acc = Tree::node(at, vec![acc, encode_tree(c, at)]);
    }
    acc
}

/// Inverse of [`encode_tree`].
pub fn decode_tree(t: &Tree, at: Symbol) -> Result<Tree> {
    if t.children.is_empty() {
        if t.label == at {
            return Err(Error::invalid("`@` cannot label a leaf of an encoded tree"));
        }
        return Ok(Tree::leaf(t.label));
    }
    if t.label != at || t.children.len() != 2 {
        return Err(Error::invalid(
            "internal nodes of an encoded tree must be binary `@` nodes",
        ));
    }
    let mut head = decode_tree(&t.children[0], at)?;
    head.children.push(decode_tree(&t.children[1], at)?);
    Ok(head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{Alphabet, TextTree};

    #[test]
    fn three_ary_node_encodes_to_size_seven() {
        let mut al = Alphabet::new();
        for s in ["a", "b", "c", "d", "@"] {
            al.intern(s);
        }
        let at = al.get("@").unwrap();
        let t = TextTree::parse("a(b,c,d)").unwrap().resolve(&al).unwrap();
        let e = encode_tree(&t, at);
        assert_eq!(e.to_text(&al), "@(@(@(a,b),c),d)");
        assert_eq!(e.size(), 7);
        assert_eq!(decode_tree(&e, at).unwrap(), t);
    }

    #[test]
    fn decode_rejects_foreign_trees() {
        let mut al = Alphabet::new();
        let a = al.intern("a");
        let at = al.intern("@");
        assert!(decode_tree(&Tree::leaf(at), at).is_err());
        assert!(decode_tree(&Tree::node(a, vec![Tree::leaf(a), Tree::leaf(a)]), at).is_err());
    }

    #[test]
    fn at_in_alphabet_is_rejected() {
        let mut b = crate::automaton::Builder::new();
        b.transition("s", "@", &[]);
        let a = b.build(1, "s").unwrap();
        assert!(encode_binary(&a).unwrap_err().to_string().contains("rename"));
    }
}
