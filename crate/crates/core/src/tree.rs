//! Ordered labeled trees and symbol interning.

use crate::error::{line_col, Error, Result};
use serde_json::Value;
use std::collections::HashMap;
use std::fmt::Write as _;

/// Interned alphabet symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(pub u32);

/// Bidirectional map between surface strings and symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
    index: HashMap<String, Symbol>,
}

impl Alphabet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns `name`, returning the existing symbol when already present.
    pub fn intern(&mut self, name: &str) -> Symbol {
        if let Some(&s) = self.index.get(name) {
            return s;
        }
        let s = Symbol(self.names.len() as u32);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), s);
        s
    }

    pub fn get(&self, name: &str) -> Option<Symbol> {
        self.index.get(name).copied()
    }

    pub fn name(&self, s: Symbol) -> &str {
        &self.names[s.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.names.len() as u32).map(Symbol)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// An ordered tree whose nodes carry symbols.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tree {
    pub label: Symbol,
    pub children: Vec<Tree>,
}

impl Tree {
    pub fn leaf(label: Symbol) -> Self {
        Tree {
            label,
            children: Vec::new(),
        }
    }

    pub fn node(label: Symbol, children: Vec<Tree>) -> Self {
        Tree { label, children }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Tree::size).sum::<usize>()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Largest number of children of any node.
    pub fn arity(&self) -> usize {
        self.children
            .iter()
            .map(Tree::arity)
            .max()
            .unwrap_or(0)
            .max(self.children.len())
    }

    /// True when every node has zero or two children.
    pub fn is_binary(&self) -> bool {
        (self.children.is_empty() || self.children.len() == 2)
            && self.children.iter().all(Tree::is_binary)
    }

    /// Node addresses in preorder; the root is the empty sequence and the
    /// i-th child of `u` is `u` followed by `i` (1-based).
    pub fn addresses(&self) -> Vec<Vec<usize>> {
        fn go(t: &Tree, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            out.push(cur.clone());
            for (i, c) in t.children.iter().enumerate() {
                cur.push(i + 1);
                go(c, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Subtree at `address`, if present.
    pub fn subtree(&self, address: &[usize]) -> Option<&Tree> {
        let mut t = self;
        for &i in address {
            t = t.children.get(i.checked_sub(1)?)?;
        }
        Some(t)
    }

    /// Compact text form `a(b,c)`.
    pub fn to_text(&self, alphabet: &Alphabet) -> String {
        let mut s = String::new();
        self.write_text(alphabet, &mut s);
        s
    }

    fn write_text(&self, alphabet: &Alphabet, out: &mut String) {
        out.push_str(alphabet.name(self.label));
        if !self.children.is_empty() {
            out.push('(');
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                c.write_text(alphabet, out);
            }
            out.push(')');
        }
    }

    pub fn to_json(&self, alphabet: &Alphabet) -> Value {
        serde_json::json!({
            "label": alphabet.name(self.label),
            "children": self.children.iter().map(|c| c.to_json(alphabet)).collect::<Vec<_>>(),
        })
    }
}

/// A tree with string labels, as produced by the parsers before the labels
/// are resolved against an alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextTree {
    pub label: String,
    pub children: Vec<TextTree>,
}

impl TextTree {
    /// Resolves labels against `alphabet`, rejecting undeclared symbols.
    pub fn resolve(&self, alphabet: &Alphabet) -> Result<Tree> {
        let label = alphabet
            .get(&self.label)
            .ok_or_else(|| Error::invalid(format!("undeclared symbol `{}` in tree", self.label)))?;
        let children = self
            .children
            .iter()
            .map(|c| c.resolve(alphabet))
            .collect::<Result<Vec<_>>>()?;
        Ok(Tree { label, children })
    }

    pub fn from_json(v: &Value) -> Result<TextTree> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::invalid("tree node must be a JSON object"))?;
        for key in obj.keys() {
            if key != "label" && key != "children" {
                return Err(Error::invalid(format!("unexpected tree field `{key}`")));
            }
        }
        let label = obj
            .get("label")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::invalid("tree node needs a string `label`"))?
            .to_string();
        let children = match obj.get("children") {
            None => Vec::new(),
            Some(Value::Array(a)) => a.iter().map(TextTree::from_json).collect::<Result<_>>()?,
            Some(_) => return Err(Error::invalid("`children` must be an array")),
        };
        Ok(TextTree { label, children })
    }

    /// Parses the compact form `a(b,c(d,e))`. Labels are runs of characters
    /// other than `(`, `)`, `,` and whitespace.
    pub fn parse(text: &str) -> Result<TextTree> {
        let mut p = TextParser { text, pos: 0 };
        p.skip_ws();
        let t = p.tree()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.err("trailing input after tree"));
        }
        Ok(t)
    }
}

struct TextParser<'a> {
    text: &'a str,
    pos: usize,
}

impl TextParser<'_> {
    fn err(&self, msg: &str) -> Error {
        let (l, c) = line_col(self.text, self.pos);
        Error::parse(l, c, msg)
    }

    fn skip_ws(&mut self) {
        while let Some(ch) = self.text[self.pos..].chars().next() {
            if ch.is_whitespace() {
                self.pos += ch.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn label(&mut self) -> Result<String> {
        let start = self.pos;
        while let Some(ch) = self.peek() {
            if ch == '(' || ch == ')' || ch == ',' || ch.is_whitespace() {
                break;
            }
            self.pos += ch.len_utf8();
        }
        if self.pos == start {
            return Err(self.err("expected a label"));
        }
        Ok(self.text[start..self.pos].to_string())
    }

    fn tree(&mut self) -> Result<TextTree> {
        let label = self.label()?;
        self.skip_ws();
        let mut children = Vec::new();
        if self.peek() == Some('(') {
            self.pos += 1;
            loop {
                self.skip_ws();
                children.push(self.tree()?);
                self.skip_ws();
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected `,` or `)`")),
                }
            }
        }
        Ok(TextTree { label, children })
    }
}

/// Renders a list of trees one per line in text form.
pub fn render_lines(trees: &[Tree], alphabet: &Alphabet) -> String {
    let mut s = String::new();
    for t in trees {
        let _ = writeln!(s, "{}", t.to_text(alphabet));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut a = Alphabet::new();
        for s in ["a", "b", "c", "d"] {
            a.intern(s);
        }
        let t = TextTree::parse("a(b, c(d,d) ,b)").unwrap().resolve(&a).unwrap();
        assert_eq!(t.size(), 6);
        assert_eq!(t.to_text(&a), "a(b,c(d,d),b)");
        let j = t.to_json(&a);
        assert_eq!(TextTree::from_json(&j).unwrap().resolve(&a).unwrap(), t);
    }

    #[test]
    fn undeclared_symbol_is_rejected() {
        let mut a = Alphabet::new();
        a.intern("a");
        let err = TextTree::parse("a(z,a)").unwrap().resolve(&a).unwrap_err();
        assert!(err.to_string().contains("undeclared symbol `z`"));
    }

    #[test]
    fn parse_errors_carry_positions() {
        match TextTree::parse("a(b,").unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (1, 5)),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn addresses_are_prefix_closed() {
        let mut a = Alphabet::new();
        a.intern("a");
        let t = TextTree::parse("a(a(a,a),a)").unwrap().resolve(&a).unwrap();
        let addrs = t.addresses();
        assert_eq!(addrs.len(), 5);
        for u in &addrs {
            if !u.is_empty() {
                assert!(addrs.contains(&u[..u.len() - 1].to_vec()));
            }
        }
        assert_eq!(t.subtree(&[1, 2]).unwrap().size(), 1);
    }
}
