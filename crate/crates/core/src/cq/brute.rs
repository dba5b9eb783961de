//! Exact answer sets by enumerating homomorphisms.

use super::{bind_atoms, bind_fact, unbind, Answer, BoundAtom, Database, Query};
use crate::error::{Error, Result};
use std::collections::BTreeSet;

/// `Q(D)` with its exact size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnswerSet {
    pub answers: BTreeSet<Answer>,
    /// Homomorphisms found; at least the number of answers.
    pub homomorphisms: u64,
}

impl AnswerSet {
    pub fn count(&self) -> usize {
        self.answers.len()
    }
}

struct Search<'a, 'd> {
    atoms: &'a [BoundAtom<'d>],
    budget: u64,
    steps: u64,
    map: Vec<Option<u32>>,
    trail: Vec<usize>,
}

impl Search<'_, '_> {
    /// Calls `f` on every total extension of `map`; `f` returns false to stop.
    fn run(&mut self, i: usize, f: &mut dyn FnMut(&[Option<u32>]) -> bool) -> Result<bool> {
        if i == self.atoms.len() {
            return Ok(f(&self.map));
        }
        let a = &self.atoms[i];
        for fact in a.tuples {
            self.steps += 1;
            if self.steps > self.budget {
                return Err(Error::Budget(format!("homomorphism search exceeded {} steps", self.budget)));
            }
            let mark = self.trail.len();
            if bind_fact(&a.args, fact, &mut self.map, &mut self.trail) {
                let go_on = self.run(i + 1, f)?;
                unbind(&mut self.map, &mut self.trail, mark);
                if !go_on {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Every homomorphism `h` from `Q` to `D`, collected as `h(x̄)`.
pub fn brute_cq_count(q: &Query, db: &Database, budget: u64) -> Result<AnswerSet> {
    let atoms = bind_atoms(q, db)?;
    let mut s = Search { atoms: &atoms, budget, steps: 0, map: vec![None; q.vars.len()], trail: Vec::new() };
    let mut answers = BTreeSet::new();
    let mut homomorphisms = 0u64;
    s.run(0, &mut |map| {
        homomorphisms += 1;
        answers.insert(
            q.head
                .iter()
                .map(|&v| db.constant_name(map[v].expect("every variable occurs in an atom")).to_string())
                .collect(),
        );
        true
    })?;
    Ok(AnswerSet { answers, homomorphisms })
}

/// Exact membership `ā ∈ Q(D)`: a homomorphism search with the head
/// variables fixed.
pub fn is_answer(q: &Query, db: &Database, answer: &[String], budget: u64) -> Result<bool> {
    if answer.len() != q.head.len() {
        return Err(Error::invalid("answer arity differs from the head"));
    }
    let atoms = bind_atoms(q, db)?;
    let mut map = vec![None; q.vars.len()];
    for (&v, c) in q.head.iter().zip(answer) {
        let Some(id) = db.constant_id(c) else {
            return Ok(false);
        };
        if map[v].is_some_and(|x| x != id) {
            return Ok(false);
        }
        map[v] = Some(id);
    }
    let mut s = Search { atoms: &atoms, budget, steps: 0, map, trail: Vec::new() };
    let mut found = false;
    s.run(0, &mut |_| {
        found = true;
        false
    })?;
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::fixtures;

    #[test]
    fn running_example_answers() {
        let a = brute_cq_count(&fixtures::q1(), &fixtures::d1(), 10_000).unwrap();
        assert_eq!(a.answers, BTreeSet::from([vec!["b".to_string()]]));
        assert_eq!(a.homomorphisms, 2);
        assert!(is_answer(&fixtures::q1(), &fixtures::d1(), &["b".into()], 10_000).unwrap());
        assert!(!is_answer(&fixtures::q1(), &fixtures::d1(), &["a".into()], 10_000).unwrap());
    }

    #[test]
    fn empty_relation_and_budget() {
        let q = Query::parse("Q(x) :- E(x,y), F(y).").unwrap();
        let db = Database::parse("E(a,b). F/1.").unwrap();
        assert_eq!(brute_cq_count(&q, &db, 100).unwrap().count(), 0);
        let db = Database::parse("E(a,b). E(b,c). F(b). F(c).").unwrap();
        assert_eq!(brute_cq_count(&q, &db, 100).unwrap().count(), 2);
        assert!(matches!(brute_cq_count(&q, &db, 2), Err(Error::Budget(_))));
    }

    #[test]
    fn constants_and_repeats() {
        let q = Query::parse("Q(x) :- E(x,x), E(x,'b').").unwrap();
        let db = Database::parse("E(a,a). E(a,b). E(b,b). E(c,c).").unwrap();
        assert_eq!(brute_cq_count(&q, &db, 100).unwrap().count(), 2);
    }
}
