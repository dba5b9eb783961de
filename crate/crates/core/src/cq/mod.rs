//! Conjunctive queries over relational databases.
//!
//! Query text: `Q(x) :- G(x), E(x,y), E(x,z), C(y), M(z).` Identifiers in
//! argument position are variables; constants in queries are quoted
//! (`'b'`) or start with a digit. Database text holds one fact per line,
//! `E(b,c1).`, where bare identifiers are constants, plus optional
//! declarations `E/2.` for relations that may be empty. `%` starts a
//! comment.

pub mod brute;
pub mod count;
pub mod decomp;
mod lex;
pub mod reduce;

use crate::error::{Error, Result};
use lex::{Lexer, Tok};
use std::collections::{BTreeMap, BTreeSet, HashMap};

pub use brute::{brute_cq_count, is_answer, AnswerSet};
pub use count::{count_cq, count_ucq, sample_cq, CqCount, CqSampler, UcqCount};
pub use decomp::{complete_decomposition, gyo_join_tree, validate_decomposition, Decomposition, HdNode, Violation};
pub use reduce::{reduce_cq_to_ta, Reduction};

/// An answer tuple, as constant names.
pub type Answer = Vec<String>;

/// An argument of an atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(usize),
    Const(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<Term>,
}

/// `Q(x̄) ← R_1(ū_1), …, R_n(ū_n)`. Variables are numbered in order of
/// first occurrence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub name: String,
    pub vars: Vec<String>,
    pub head: Vec<usize>,
    pub atoms: Vec<Atom>,
}

impl Query {
    pub fn parse(text: &str) -> Result<Query> {
        let mut lx = Lexer::new(text);
        let name = lx.ident("query name")?;
        let mut vars: Vec<String> = Vec::new();
        let mut var = |v: &str| -> usize {
            match vars.iter().position(|x| x == v) {
                Some(i) => i,
                None => {
                    vars.push(v.to_string());
                    vars.len() - 1
                }
            }
        };
        let head_terms = lx.args()?;
        let mut head_names = Vec::new();
        for (tok, off) in head_terms {
            match tok {
                Tok::Ident(v) => head_names.push(v),
                _ => return Err(lx.error_at(off, "head arguments must be variables")),
            }
        }
        let head: Vec<usize> = head_names.iter().map(|v| var(v)).collect();
        lx.expect(&Tok::Neck, "`:-`")?;
        let mut atoms = Vec::new();
        loop {
            let relation = lx.ident("relation name")?;
            let args = lx
                .args()?
                .into_iter()
                .map(|(tok, _)| match tok {
                    Tok::Ident(v) => Term::Var(var(&v)),
                    Tok::Quoted(c) | Tok::Number(c) => Term::Const(c),
                    _ => unreachable!("args() yields terms only"),
                })
                .collect();
            atoms.push(Atom { relation, args });
            match lx.next_tok()? {
                Some((Tok::Comma, _)) => continue,
                Some((Tok::Dot, _)) | None => break,
                Some((_, off)) => return Err(lx.error_at(off, "expected `,` or `.`")),
            }
        }
        if let Some((_, off)) = lx.next_tok()? {
            return Err(lx.error_at(off, "trailing input after the query"));
        }
        let q = Query { name, vars, head, atoms };
        let body: BTreeSet<usize> = (0..q.atoms.len()).flat_map(|i| q.atom_vars(i)).collect();
        if let Some(&v) = q.head.iter().find(|v| !body.contains(v)) {
            return Err(Error::invalid(format!(
                "head variable `{}` does not occur in the body",
                q.vars[v]
            )));
        }
        Ok(q)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// `var(R_i)`.
    pub fn atom_vars(&self, i: usize) -> BTreeSet<usize> {
        self.atoms[i]
            .args
            .iter()
            .filter_map(|t| match t {
                Term::Var(v) => Some(*v),
                Term::Const(_) => None,
            })
            .collect()
    }

    pub fn head_vars(&self) -> BTreeSet<usize> {
        self.head.iter().copied().collect()
    }

    pub fn atom_text(&self, i: usize) -> String {
        let a = &self.atoms[i];
        let args: Vec<String> = a
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => self.vars[*v].clone(),
                Term::Const(c) => format!("'{c}'"),
            })
            .collect();
        format!("{}({})", a.relation, args.join(","))
    }

    pub fn to_text(&self) -> String {
        let head: Vec<&str> = self.head.iter().map(|&v| self.vars[v].as_str()).collect();
        let body: Vec<String> = (0..self.atoms.len()).map(|i| self.atom_text(i)).collect();
        format!("{}({}) :- {}.", self.name, head.join(","), body.join(", "))
    }
}

/// Tuples of one relation, as constant ids.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Relation {
    pub arity: usize,
    pub tuples: BTreeSet<Vec<u32>>,
}

/// A set of facts over interned constants.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Database {
    constants: Vec<String>,
    index: HashMap<String, u32>,
    relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, c: &str) -> u32 {
        if let Some(&i) = self.index.get(c) {
            return i;
        }
        let i = self.constants.len() as u32;
        self.constants.push(c.to_string());
        self.index.insert(c.to_string(), i);
        i
    }

    pub fn constant_id(&self, c: &str) -> Option<u32> {
        self.index.get(c).copied()
    }

    pub fn constant_name(&self, id: u32) -> &str {
        &self.constants[id as usize]
    }

    pub fn constants(&self) -> &[String] {
        &self.constants
    }

    /// Declares a relation, which may stay empty.
    pub fn declare(&mut self, name: &str, arity: usize) -> Result<()> {
        match self.relations.get(name) {
            Some(r) if r.arity != arity => Err(Error::invalid(format!(
                "relation `{name}` used with arities {} and {arity}",
                r.arity
            ))),
            Some(_) => Ok(()),
            None => {
                self.relations.insert(name.to_string(), Relation { arity, tuples: BTreeSet::new() });
                Ok(())
            }
        }
    }

    pub fn add_fact(&mut self, name: &str, args: &[&str]) -> Result<()> {
        self.declare(name, args.len())?;
        let tuple: Vec<u32> = args.iter().map(|a| self.intern(a)).collect();
        self.relations.get_mut(name).unwrap().tuples.insert(tuple);
        Ok(())
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn relations(&self) -> impl Iterator<Item = (&String, &Relation)> {
        self.relations.iter()
    }

    /// `‖D‖`: one unit per fact plus one per argument.
    pub fn size(&self) -> usize {
        self.relations.values().map(|r| r.tuples.len() * (1 + r.arity)).sum()
    }

    pub fn num_facts(&self) -> usize {
        self.relations.values().map(|r| r.tuples.len()).sum()
    }

    pub fn parse(text: &str) -> Result<Database> {
        let mut db = Database::new();
        let mut lx = Lexer::new(text);
        while let Some((tok, off)) = lx.next_tok()? {
            let Tok::Ident(name) = tok else {
                return Err(lx.error_at(off, "expected a relation name"));
            };
            if lx.peek_is(&Tok::Slash)? {
                lx.next_tok()?;
                let arity = match lx.next_tok()? {
                    Some((Tok::Number(n), off)) => {
                        n.parse::<usize>().map_err(|_| lx.error_at(off, "bad arity"))?
                    }
                    Some((_, off)) => return Err(lx.error_at(off, "expected an arity")),
                    None => return Err(lx.error_at(text.len(), "expected an arity")),
                };
                db.declare(&name, arity).map_err(|e| lx.error_at(off, &e.to_string()))?;
            } else {
                let args: Vec<String> = lx
                    .args()?
                    .into_iter()
                    .map(|(t, _)| match t {
                        Tok::Ident(c) | Tok::Quoted(c) | Tok::Number(c) => c,
                        _ => unreachable!("args() yields terms only"),
                    })
                    .collect();
                let refs: Vec<&str> = args.iter().map(String::as_str).collect();
                db.add_fact(&name, &refs).map_err(|e| lx.error_at(off, &e.to_string()))?;
            }
            lx.expect(&Tok::Dot, "`.`")?;
        }
        Ok(db)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, r) in &self.relations {
            if r.tuples.is_empty() {
                out.push_str(&format!("{name}/{}.\n", r.arity));
            }
            for t in &r.tuples {
                let args: Vec<&str> = t.iter().map(|&c| self.constant_name(c)).collect();
                out.push_str(&format!("{name}({}).\n", args.join(",")));
            }
        }
        out
    }
}

/// An atom with its constants resolved against a database. A constant
/// missing from the database matches nothing.
#[derive(Clone, Debug)]
pub(crate) struct BoundAtom<'d> {
    pub args: Vec<Arg>,
    pub tuples: &'d BTreeSet<Vec<u32>>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Arg {
    Var(usize),
    Const(Option<u32>),
}

/// Resolves every atom of `q` against `db`, checking that each relation
/// exists with the right arity.
pub(crate) fn bind_atoms<'d>(q: &Query, db: &'d Database) -> Result<Vec<BoundAtom<'d>>> {
    q.atoms
        .iter()
        .map(|a| {
            let r = db.relation(&a.relation).ok_or_else(|| {
                Error::invalid(format!("relation `{}` does not occur in the database", a.relation))
            })?;
            if r.arity != a.args.len() {
                return Err(Error::invalid(format!(
                    "relation `{}` has arity {} in the database but {} in the query",
                    a.relation,
                    r.arity,
                    a.args.len()
                )));
            }
            let args = a
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Arg::Var(*v),
                    Term::Const(c) => Arg::Const(db.constant_id(c)),
                })
                .collect();
            Ok(BoundAtom { args, tuples: &r.tuples })
        })
        .collect()
}

/// Extends `map` so that the atom maps onto `fact`, pushing newly bound
/// variables to `trail`. On mismatch nothing is left bound.
pub(crate) fn bind_fact(args: &[Arg], fact: &[u32], map: &mut [Option<u32>], trail: &mut Vec<usize>) -> bool {
    let mark = trail.len();
    for (arg, &c) in args.iter().zip(fact) {
        let ok = match *arg {
            Arg::Const(k) => k == Some(c),
            Arg::Var(v) => match map[v] {
                Some(x) => x == c,
                None => {
                    map[v] = Some(c);
                    trail.push(v);
                    true
                }
            },
        };
        if !ok {
            unbind(map, trail, mark);
            return false;
        }
    }
    true
}

pub(crate) fn unbind(map: &mut [Option<u32>], trail: &mut Vec<usize>, mark: usize) {
    for v in trail.drain(mark..) {
        map[v] = None;
    }
}

/// A small acyclic query `Q1` over `D1`, and the triangle query.
pub mod fixtures {
    use super::{Database, Query};

    pub const Q1: &str = "Q1(x) :- G(x), E(x,y), E(x,z), C(y), M(z).";
    pub const D1: &str = "G(a).\nG(b).\nE(a,c1).\nE(b,c1).\nE(b,c2).\nE(b,c3).\nC(c1).\nC(c2).\nM(c3).\n";
    pub const TRIANGLE: &str = "Q(x,y,z) :- R(x,y), S(y,z), T(z,x).";

    pub fn q1() -> Query {
        Query::parse(Q1).unwrap()
    }

    pub fn d1() -> Database {
        Database::parse(D1).unwrap()
    }

    pub fn triangle() -> Query {
        Query::parse(TRIANGLE).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_running_example() {
        let q = fixtures::q1();
        assert_eq!(q.vars, vec!["x", "y", "z"]);
        assert_eq!(q.head, vec![0]);
        assert_eq!(q.atoms.len(), 5);
        assert_eq!(Query::parse(&q.to_text()).unwrap(), q);
        let d = fixtures::d1();
        assert_eq!(d.num_facts(), 9);
        assert_eq!(Database::parse(&d.to_text()).unwrap().to_text(), d.to_text());
    }

    #[test]
    fn constants_and_declarations() {
        let q = Query::parse("Q(x) :- E(x, 'c1'), F(x, 7)").unwrap();
        assert_eq!(q.atoms[0].args[1], Term::Const("c1".into()));
        assert_eq!(q.atoms[1].args[1], Term::Const("7".into()));
        let d = Database::parse("% empty\nE/2.\nF(a, 7).").unwrap();
        assert!(d.relation("E").unwrap().tuples.is_empty());
    }

    #[test]
    fn rejects_malformed_text() {
        let e = Query::parse("Q(x) :- E(x,y)\n, F(").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        assert!(Query::parse("Q(y) :- E(x,x).").is_err());
        assert!(Query::parse("Q('a') :- E(x).").is_err());
        let e = Database::parse("E(a,b).\nE(a).").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        assert!(Database::parse("E(a,b)").is_err());
    }
}
