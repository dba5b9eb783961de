//! Existential constraint satisfaction problems and their query form.

use crate::config::Config;
use crate::cq::count::{count_cq, CqCount};
use crate::cq::{Atom, Database, Decomposition, Query, Term};
use crate::error::{Error, Result};
use serde_json::Value;
use std::collections::{BTreeSet, HashMap};

/// A constraint `(t̄, R)`: a scope of variable indices and a relation over
/// domain indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub scope: Vec<usize>,
    pub relation: BTreeSet<Vec<usize>>,
}

/// `E = (U, (V, D, C))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ecsp {
    pub variables: Vec<String>,
    /// `U` as indices into `variables`, in output order.
    pub output: Vec<usize>,
    pub domain: Vec<String>,
    pub constraints: Vec<Constraint>,
}

impl Ecsp {
    pub fn new(variables: Vec<String>, output: Vec<usize>, domain: Vec<String>, constraints: Vec<Constraint>) -> Result<Ecsp> {
        let e = Ecsp { variables, output, domain, constraints };
        e.check()?;
        Ok(e)
    }

    fn check(&self) -> Result<()> {
        let nv = self.variables.len();
        if self.domain.is_empty() {
            return Err(Error::invalid("the domain is empty"));
        }
        if BTreeSet::from_iter(&self.variables).len() != nv {
            return Err(Error::invalid("duplicate variable names"));
        }
        if BTreeSet::from_iter(&self.domain).len() != self.domain.len() {
            return Err(Error::invalid("duplicate domain values"));
        }
        if self.output.iter().any(|&u| u >= nv) || BTreeSet::from_iter(&self.output).len() != self.output.len() {
            return Err(Error::invalid("output variables must be distinct members of V"));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.scope.is_empty() || c.scope.iter().any(|&v| v >= nv) {
                return Err(Error::invalid(format!("constraint {i} has an empty or unknown scope")));
            }
            if c.relation.iter().any(|t| t.len() != c.scope.len() || t.iter().any(|&d| d >= self.domain.len())) {
                return Err(Error::invalid(format!("constraint {i} has a tuple of the wrong arity or outside D")));
            }
        }
        Ok(())
    }

    /// `{"variables", "output", "domain", "constraints": [{"scope", "relation"}]}`.
    pub fn from_json(v: &Value) -> Result<Ecsp> {
        let strings = |key: &str| -> Result<Vec<String>> {
            v.get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| Error::invalid(format!("ECSP needs a `{key}` array")))?
                .iter()
                .map(|x| match x {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    _ => Err(Error::invalid(format!("`{key}` entries must be strings"))),
                })
                .collect()
        };
        let variables = strings("variables")?;
        let domain = strings("domain")?;
        let var_ix: HashMap<&str, usize> = variables.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let dom_ix: HashMap<&str, usize> = domain.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let var = |s: &str| var_ix.get(s).copied().ok_or_else(|| Error::invalid(format!("unknown variable `{s}`")));
        let output = strings("output")?.iter().map(|s| var(s)).collect::<Result<Vec<_>>>()?;
        let mut constraints = Vec::new();
        for c in v.get("constraints").and_then(Value::as_array).ok_or_else(|| Error::invalid("ECSP needs `constraints`"))? {
            let scope = c
                .get("scope")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::invalid("constraint needs a `scope`"))?
                .iter()
                .map(|x| var(x.as_str().unwrap_or("")))
                .collect::<Result<Vec<_>>>()?;
            let mut relation = BTreeSet::new();
            for t in c.get("relation").and_then(Value::as_array).ok_or_else(|| Error::invalid("constraint needs a `relation`"))? {
                let tuple = t
                    .as_array()
                    .ok_or_else(|| Error::invalid("relation tuples are arrays"))?
                    .iter()
                    .map(|x| {
                        let s = match x {
                            Value::String(s) => s.clone(),
                            other => other.to_string(),
                        };
                        dom_ix.get(s.as_str()).copied().ok_or_else(|| Error::invalid(format!("`{s}` is not in the domain")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                relation.insert(tuple);
            }
            constraints.push(Constraint { scope, relation });
        }
        Ecsp::new(variables, output, domain, constraints)
    }

    /// Output variables that occur in no constraint.
    fn free_outputs(&self) -> Vec<usize> {
        let used: BTreeSet<usize> = self.constraints.iter().flat_map(|c| c.scope.iter().copied()).collect();
        self.output.iter().copied().filter(|u| !used.contains(u)).collect()
    }
}

/// `(Q_E, D_E)`: one fresh relation `C<i>` per constraint holding `R_i`
/// extensionally, head `ȳ = U`. Output variables outside every scope get a
/// unary `Dom_<x>` atom over `D`, appended after the constraint atoms.
pub fn ecsp_to_cq(e: &Ecsp) -> Result<(Query, Database)> {
    let mut db = Database::new();
    for d in &e.domain {
        db.intern(d);
    }
    let mut atoms = Vec::new();
    for (i, c) in e.constraints.iter().enumerate() {
        let name = format!("C{i}");
        db.declare(&name, c.scope.len())?;
        for t in &c.relation {
            let args: Vec<&str> = t.iter().map(|&d| e.domain[d].as_str()).collect();
            db.add_fact(&name, &args)?;
        }
        atoms.push(Atom { relation: name, args: c.scope.iter().map(|&v| Term::Var(v)).collect() });
    }
    for u in e.free_outputs() {
        let name = format!("Dom_{}", e.variables[u]);
        for d in &e.domain {
            db.add_fact(&name, &[d])?;
        }
        atoms.push(Atom { relation: name, args: vec![Term::Var(u)] });
    }
    let q = Query { name: "Q_E".into(), vars: e.variables.clone(), head: e.output.clone(), atoms };
    Ok((q, db))
}

/// The reverse direction: variables of `Q` become `V`, the head becomes `U`
/// and each atom becomes a constraint over the variable positions whose
/// relation holds the matching facts. `D` is the active domain of `D`.
pub fn cq_to_ecsp(q: &Query, db: &Database) -> Result<Ecsp> {
    let head: Vec<usize> = q.head.clone();
    if BTreeSet::from_iter(&head).len() != head.len() {
        return Err(Error::invalid("the head repeats a variable; an ECSP output is a set"));
    }
    let domain: Vec<String> = db.constants().to_vec();
    let mut constraints = Vec::new();
    for (i, a) in q.atoms.iter().enumerate() {
        let rel = db
            .relation(&a.relation)
            .ok_or_else(|| Error::invalid(format!("relation `{}` does not occur in the database", a.relation)))?;
        let positions: Vec<usize> = (0..a.args.len()).filter(|&p| matches!(a.args[p], Term::Var(_))).collect();
        if positions.is_empty() {
            return Err(Error::invalid(format!("atom {i} has no variables")));
        }
        let scope: Vec<usize> = positions
            .iter()
            .map(|&p| match a.args[p] {
                Term::Var(v) => v,
                Term::Const(_) => unreachable!(),
            })
            .collect();
        let mut relation = BTreeSet::new();
        'facts: for t in &rel.tuples {
            for (p, arg) in a.args.iter().enumerate() {
                if let Term::Const(c) = arg {
                    if db.constant_id(c) != Some(t[p]) {
                        continue 'facts;
                    }
                }
            }
            relation.insert(positions.iter().map(|&p| t[p] as usize).collect());
        }
        constraints.push(Constraint { scope, relation });
    }
    if domain.is_empty() {
        return Err(Error::invalid("the database has no constants"));
    }
    Ecsp::new(q.vars.clone(), head, domain, constraints)
}

/// `|sol(E)|` by enumerating `D^|V|`.
pub fn brute_ecsp_count(e: &Ecsp, budget: u64) -> Result<usize> {
    let nv = e.variables.len();
    let total = (e.domain.len() as f64).powi(nv as i32);
    if total > budget as f64 {
        return Err(Error::Budget(format!("{total:.3e} assignments exceed the budget {budget}")));
    }
    let mut nu = vec![0usize; nv];
    let mut sols: BTreeSet<Vec<usize>> = BTreeSet::new();
    loop {
        if e.constraints.iter().all(|c| c.relation.contains(&c.scope.iter().map(|&v| nu[v]).collect::<Vec<_>>())) {
            sols.insert(e.output.iter().map(|&u| nu[u]).collect());
        }
        let mut i = 0;
        loop {
            if i == nv {
                return Ok(sols.len());
            }
            nu[i] += 1;
            if nu[i] < e.domain.len() {
                break;
            }
            nu[i] = 0;
            i += 1;
        }
    }
}

/// A decomposition of the constraint atoms extended to cover the `Dom_`
/// atoms that [`ecsp_to_cq`] appends: each becomes a leaf under the root.
pub fn extend_decomposition(e: &Ecsp, q: &Query, hd: &Decomposition) -> Decomposition {
    let mut d = hd.clone();
    for (k, u) in e.free_outputs().into_iter().enumerate() {
        let atom = e.constraints.len() + k;
        debug_assert!(atom < q.atoms.len());
        let root = d.root;
        d.add_leaf(root, &format!("dom_{}", q.vars[u]), BTreeSet::from([u]), BTreeSet::from([atom]));
    }
    d
}

/// `|sol(E)|` through the query pipeline. The decomposition refers to
/// constraint indices; without one a join tree is computed.
pub fn count_ecsp(e: &Ecsp, hd: Option<&Decomposition>, k: usize, cfg: &Config) -> Result<CqCount> {
    let (q, db) = ecsp_to_cq(e)?;
    let hd = hd.map(|h| extend_decomposition(e, &q, h));
    count_cq(&q, &db, hd.as_ref(), k, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::{brute_cq_count, gyo_join_tree, reduce_cq_to_ta};
    use crate::oracles::brute_slice;
    use serde_json::json;

    fn sample() -> Ecsp {
        Ecsp::from_json(&json!({
            "variables": ["x", "y", "z", "w"],
            "output": ["x", "w"],
            "domain": ["0", "1", "2"],
            "constraints": [
                {"scope": ["x", "y"], "relation": [["0","1"], ["1","2"], ["2","0"], ["1","1"]]},
                {"scope": ["y", "z"], "relation": [["1","0"], ["2","2"], ["1","1"]]}
            ]
        }))
        .unwrap()
    }

    #[test]
    fn query_form_preserves_counts() {
        let e = sample();
        let truth = brute_ecsp_count(&e, 1_000_000).unwrap();
        let (q, db) = ecsp_to_cq(&e).unwrap();
        assert_eq!(brute_cq_count(&q, &db, 1_000_000).unwrap().count(), truth);
        let r = reduce_cq_to_ta(&q, &db, &gyo_join_tree(&q).unwrap(), 1, 1_000_000).unwrap();
        assert_eq!(brute_slice(&r.automaton, r.n, 1_000_000).unwrap().len(), truth);
        let back = cq_to_ecsp(&q, &db).unwrap();
        assert_eq!(brute_ecsp_count(&back, 1_000_000).unwrap(), truth);
    }

    #[test]
    fn empty_relation_gives_zero() {
        let mut e = sample();
        e.constraints[1].relation.clear();
        assert_eq!(brute_ecsp_count(&e, 1_000).unwrap(), 0);
        let c = count_ecsp(&e, None, 1, &Config::default()).unwrap();
        assert_eq!(c.estimate.value, 0.0);
    }

    #[test]
    fn all_outputs_count_assignments() {
        let mut e = sample();
        e.output = vec![0, 1, 2, 3];
        // w is unconstrained and ranges over the whole domain.
        let truth = brute_ecsp_count(&e, 1_000).unwrap();
        assert_eq!(truth, 5 * 3);
        let (q, db) = ecsp_to_cq(&e).unwrap();
        assert_eq!(brute_cq_count(&q, &db, 1_000_000).unwrap().count(), truth);
    }
}
