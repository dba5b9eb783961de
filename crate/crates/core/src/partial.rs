//! Partial trees: binary trees whose leaves may be holes carrying the size
//! of the subtree that will replace them.
//!
//! The tree is stored as a preorder token sequence. Preorder coincides with
//! the lexicographic order of node addresses, which is the order used to
//! break ties between holes of equal size.

use crate::error::{line_col, Error, Result};
use crate::tree::{Alphabet, Symbol, Tree};

const KIND_SHIFT: u32 = 30;
const PAYLOAD: u32 = (1 << KIND_SHIFT) - 1;
const LEAF: u32 = 0;
const NODE: u32 = 1;
const HOLE: u32 = 2;

/// One preorder token.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Token {
    Leaf(Symbol),
    /// Internal binary node; its two subtrees follow in preorder.
    Node(Symbol),
    Hole(usize),
}

impl Token {
    fn pack(self) -> u32 {
        match self {
            Token::Leaf(s) => (LEAF << KIND_SHIFT) | s.0,
            Token::Node(s) => (NODE << KIND_SHIFT) | s.0,
            Token::Hole(h) => (HOLE << KIND_SHIFT) | h as u32,
        }
    }

    fn unpack(x: u32) -> Token {
        match x >> KIND_SHIFT {
            LEAF => Token::Leaf(Symbol(x & PAYLOAD)),
            NODE => Token::Node(Symbol(x & PAYLOAD)),
            _ => Token::Hole((x & PAYLOAD) as usize),
        }
    }
}

/// A binary partial tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialTree {
    tokens: Vec<u32>,
}

/// The choice made by an immediate extension at a hole.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExtensionChoice {
    /// Token position of the hole.
    pub hole: usize,
    pub symbol: Symbol,
    /// Left hole size, or `None` for a leaf replacement.
    pub left: Option<usize>,
}

impl PartialTree {
    /// The partial tree consisting of a single hole of size `i`.
    pub fn hole(i: usize) -> Self {
        PartialTree {
            tokens: vec![Token::Hole(i).pack()],
        }
    }

    pub fn from_tokens(tokens: &[Token]) -> Result<Self> {
        let t = PartialTree {
            tokens: tokens.iter().map(|t| t.pack()).collect(),
        };
        t.check()?;
        Ok(t)
    }

    pub fn from_tree(t: &Tree) -> Result<Self> {
        fn go(t: &Tree, out: &mut Vec<u32>) -> Result<()> {
            match t.children.len() {
                0 => out.push(Token::Leaf(t.label).pack()),
                2 => {
                    out.push(Token::Node(t.label).pack());
                    go(&t.children[0], out)?;
                    go(&t.children[1], out)?;
                }
                _ => return Err(Error::invalid("partial trees are binary")),
            }
            Ok(())
        }
        let mut tokens = Vec::new();
        go(t, &mut tokens)?;
        Ok(PartialTree { tokens })
    }

    fn check(&self) -> Result<()> {
        let mut need = 1usize;
        for (i, &x) in self.tokens.iter().enumerate() {
            if need == 0 {
                return Err(Error::invalid(format!("extra token at position {i}")));
            }
            need -= 1;
            match Token::unpack(x) {
                Token::Node(_) => need += 2,
                Token::Hole(0) => return Err(Error::invalid("holes must have size at least 1")),
                _ => {}
            }
        }
        if need != 0 || self.tokens.is_empty() {
            return Err(Error::invalid("truncated partial tree"));
        }
        Ok(())
    }

    pub fn tokens(&self) -> impl Iterator<Item = Token> + '_ {
        self.tokens.iter().map(|&x| Token::unpack(x))
    }

    pub fn token(&self, pos: usize) -> Token {
        Token::unpack(self.tokens[pos])
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Packed tokens, usable as a hash key.
    pub fn key(&self) -> &[u32] {
        &self.tokens
    }

    /// Full size: symbol nodes plus the sizes of all holes.
    pub fn full_size(&self) -> usize {
        self.tokens()
            .map(|t| match t {
                Token::Hole(h) => h,
                _ => 1,
            })
            .sum()
    }

    pub fn is_complete(&self) -> bool {
        self.tokens().all(|t| !matches!(t, Token::Hole(_)))
    }

    /// Token positions of holes in preorder.
    pub fn holes(&self) -> Vec<usize> {
        self.tokens()
            .enumerate()
            .filter(|(_, t)| matches!(t, Token::Hole(_)))
            .map(|(i, _)| i)
            .collect()
    }

    /// The hole of minimum size; ties go to the lexicographically smallest
    /// address, i.e. the first such hole in preorder.
    pub fn min_hole(&self) -> Result<usize> {
        let mut best: Option<(usize, usize)> = None;
        for (i, t) in self.tokens().enumerate() {
            if let Token::Hole(h) = t {
                if best.is_none_or(|(bh, _)| h < bh) {
                    best = Some((h, i));
                }
            }
        }
        best.map(|(_, i)| i)
            .ok_or_else(|| Error::invalid("a complete partial tree has no holes"))
    }

    /// Immediate extensions at the hole at token position `hole`, restricted
    /// to `symbols`: leaf replacements for size 1, otherwise every symbol
    /// with every split `j ∈ [1, h−2]`.
    pub fn immediate_extensions(
        &self,
        hole: usize,
        symbols: &[Symbol],
    ) -> Vec<(ExtensionChoice, PartialTree)> {
        let Token::Hole(h) = self.token(hole) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for &a in symbols {
            if h == 1 {
                let mut tokens = self.tokens.clone();
                tokens[hole] = Token::Leaf(a).pack();
                out.push((
                    ExtensionChoice {
                        hole,
                        symbol: a,
                        left: None,
                    },
                    PartialTree { tokens },
                ));
                continue;
            }
            for j in 1..h.saturating_sub(1) {
                let mut tokens = Vec::with_capacity(self.tokens.len() + 2);
                tokens.extend_from_slice(&self.tokens[..hole]);
                tokens.push(Token::Node(a).pack());
                tokens.push(Token::Hole(j).pack());
                tokens.push(Token::Hole(h - j - 1).pack());
                tokens.extend_from_slice(&self.tokens[hole + 1..]);
                out.push((
                    ExtensionChoice {
                        hole,
                        symbol: a,
                        left: Some(j),
                    },
                    PartialTree { tokens },
                ));
            }
        }
        out
    }

    /// The complete tree, or `None` when holes remain.
    pub fn to_tree(&self) -> Option<Tree> {
        fn go(t: &PartialTree, pos: &mut usize) -> Option<Tree> {
            let tok = t.token(*pos);
            *pos += 1;
            match tok {
                Token::Leaf(a) => Some(Tree::leaf(a)),
                Token::Node(a) => {
                    let l = go(t, pos)?;
                    let r = go(t, pos)?;
                    Some(Tree::node(a, vec![l, r]))
                }
                Token::Hole(_) => None,
            }
        }
        go(self, &mut 0)
    }

    /// Replaces holes, in preorder, by the given trees.
    pub fn fill(&self, fillers: &[&Tree]) -> Result<Tree> {
        fn go(t: &PartialTree, pos: &mut usize, fill: &mut std::slice::Iter<&Tree>) -> Result<Tree> {
            let tok = t.token(*pos);
            *pos += 1;
            match tok {
                Token::Leaf(a) => Ok(Tree::leaf(a)),
                Token::Node(a) => {
                    let l = go(t, pos, fill)?;
                    let r = go(t, pos, fill)?;
                    Ok(Tree::node(a, vec![l, r]))
                }
                Token::Hole(h) => {
                    let f = fill.next().ok_or_else(|| Error::invalid("too few fillers"))?;
                    if f.size() != h {
                        return Err(Error::invalid("filler size differs from hole size"));
                    }
                    Ok((*f).clone())
                }
            }
        }
        let mut it = fillers.iter();
        let t = go(self, &mut 0, &mut it)?;
        if it.next().is_some() {
            return Err(Error::invalid("too many fillers"));
        }
        Ok(t)
    }

    /// Text form: symbols as in trees, holes written `#h`.
    pub fn to_text(&self, alphabet: &Alphabet) -> String {
        fn go(t: &PartialTree, pos: &mut usize, al: &Alphabet, out: &mut String) {
            let tok = t.token(*pos);
            *pos += 1;
            match tok {
                Token::Leaf(a) => out.push_str(al.name(a)),
                Token::Hole(h) => {
                    out.push('#');
                    out.push_str(&h.to_string());
                }
                Token::Node(a) => {
                    out.push_str(al.name(a));
                    out.push('(');
                    go(t, pos, al, out);
                    out.push(',');
                    go(t, pos, al, out);
                    out.push(')');
                }
            }
        }
        let mut s = String::new();
        go(self, &mut 0, alphabet, &mut s);
        s
    }

    /// Parses the text form, e.g. `a(#3,a(b,#1))`.
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<PartialTree> {
        let tt = crate::tree::TextTree::parse(text)?;
        let mut tokens = Vec::new();
        fn go(t: &crate::tree::TextTree, al: &Alphabet, text: &str, out: &mut Vec<u32>) -> Result<()> {
            if let Some(num) = t.label.strip_prefix('#') {
                if !t.children.is_empty() {
                    return Err(Error::invalid("holes must be leaves"));
                }
                let h: usize = num.parse().map_err(|_| {
                    let off = text.find(&t.label).unwrap_or(0);
                    let (l, c) = line_col(text, off);
                    Error::parse(l, c, format!("bad hole size `{}`", t.label))
                })?;
                if h == 0 || h > PAYLOAD as usize {
                    return Err(Error::invalid("hole size out of range"));
                }
                out.push(Token::Hole(h).pack());
                return Ok(());
            }
            let a = al
                .get(&t.label)
                .ok_or_else(|| Error::invalid(format!("undeclared symbol `{}` in tree", t.label)))?;
            match t.children.len() {
                0 => out.push(Token::Leaf(a).pack()),
                2 => {
                    out.push(Token::Node(a).pack());
                    go(&t.children[0], al, text, out)?;
                    go(&t.children[1], al, text, out)?;
                }
                _ => return Err(Error::invalid("partial trees are binary")),
            }
            Ok(())
        }
        go(&tt, alphabet, text, &mut tokens)?;
        Ok(PartialTree { tokens })
    }

    /// Structural view with parents, children and full subtree sizes.
    pub fn layout(&self) -> Layout {
        let n = self.tokens.len();
        let mut parent = vec![usize::MAX; n];
        let mut children = vec![[usize::MAX; 2]; n];
        let mut depth = vec![0usize; n];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for i in 0..n {
            if let Some((p, filled)) = stack.pop() {
                parent[i] = p;
                children[p][filled] = i;
                depth[i] = depth[p] + 1;
                if filled == 0 {
                    stack.push((p, 1));
                }
            }
            if let Token::Node(_) = self.token(i) {
                stack.push((i, 0));
            }
        }
        let mut size = vec![0usize; n];
        for i in (0..n).rev() {
            size[i] = match self.token(i) {
                Token::Hole(h) => h,
                Token::Leaf(_) => 1,
                Token::Node(_) => 1 + size[children[i][0]] + size[children[i][1]],
            };
        }
        Layout {
            parent,
            children,
            depth,
            size,
        }
    }
}

/// Parents, children, depths and full sizes, indexed by token position.
#[derive(Clone, Debug)]
pub struct Layout {
    pub parent: Vec<usize>,
    pub children: Vec<[usize; 2]>,
    pub depth: Vec<usize>,
    pub size: Vec<usize>,
}

impl Layout {
    pub fn is_ancestor(&self, a: usize, mut b: usize) -> bool {
        while b != usize::MAX {
            if a == b {
                return true;
            }
            b = self.parent[b];
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha() -> Alphabet {
        let mut a = Alphabet::new();
        a.intern("a");
        a.intern("b");
        a
    }

    #[test]
    fn extension_counts() {
        let al = alpha();
        let syms: Vec<Symbol> = al.symbols().collect();
        let t = PartialTree::hole(1);
        assert_eq!(t.immediate_extensions(0, &syms).len(), 2);
        let t = PartialTree::hole(5);
        assert_eq!(t.immediate_extensions(0, &syms[..1]).len(), 3);
        for (_, e) in t.immediate_extensions(0, &syms) {
            assert_eq!(e.full_size(), 5);
        }
    }

    #[test]
    fn min_hole_prefers_smaller_then_leftmost() {
        let al = alpha();
        let t = PartialTree::parse("a(#5,a(#3,#7))", &al).unwrap();
        assert_eq!(t.token(t.min_hole().unwrap()), Token::Hole(3));
        let t = PartialTree::parse("a(a(b,#3),a(#3,b))", &al).unwrap();
        let h = t.min_hole().unwrap();
        assert_eq!(h, 3);
        assert!(PartialTree::parse("a(b,b)", &al).unwrap().min_hole().is_err());
    }

    #[test]
    fn text_round_trip_and_layout() {
        let al = alpha();
        let t = PartialTree::parse("a(#3,a(b,#1))", &al).unwrap();
        assert_eq!(t.to_text(&al), "a(#3,a(b,#1))");
        assert_eq!(t.full_size(), 7);
        let l = t.layout();
        assert_eq!(l.size[0], 7);
        assert_eq!(l.parent[4], 2);
        assert!(l.is_ancestor(0, 4));
    }
}
