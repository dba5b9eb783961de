//! Hypertree decompositions: validation, completion and GYO join trees.

use super::Query;
use crate::error::{Error, Result};
use serde_json::{json, Value};
use std::collections::{BTreeSet, HashMap};
use thiserror::Error as ThisError;

/// A node `p` with its bag `χ(p)` (variable indices) and guard `ξ(p)`
/// (atom indices).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HdNode {
    pub id: String,
    pub chi: BTreeSet<usize>,
    pub xi: BTreeSet<usize>,
    pub children: Vec<usize>,
}

/// A rooted hypertree `⟨T, χ, ξ⟩`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub nodes: Vec<HdNode>,
    pub root: usize,
}

/// The first violated decomposition condition, with witnesses.
#[derive(Clone, Debug, PartialEq, Eq, ThisError)]
pub enum Violation {
    #[error("no node's bag covers the variables of atom {atom} `{text}`")]
    AtomNotCovered { atom: usize, text: String },
    #[error("the nodes whose bag holds `{variable}` are not connected: {nodes:?}")]
    Disconnected { variable: String, nodes: Vec<String> },
    #[error("bag of node `{node}` holds {variables:?}, which its guard atoms do not mention")]
    BagNotGuarded { node: String, variables: Vec<String> },
    #[error("guard variables {variables:?} of node `{node}` reappear below it but are missing from its bag")]
    Descendant { node: String, variables: Vec<String> },
}

impl Decomposition {
    /// Parses `{nodes:[{id, chi:[..], xi:[atomIndex..], children:[..]}], root}`.
    /// Ids may be strings or integers.
    pub fn from_json(v: &Value, q: &Query) -> Result<Decomposition> {
        let id_of = |x: &Value| -> Result<String> {
            match x {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                _ => Err(Error::invalid("decomposition ids must be strings or integers")),
            }
        };
        let raw = v
            .get("nodes")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::invalid("decomposition needs a `nodes` array"))?;
        let mut index = HashMap::new();
        for (i, node) in raw.iter().enumerate() {
            let id = id_of(node.get("id").ok_or_else(|| Error::invalid(format!("node {i} has no `id`")))?)?;
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate node id `{id}`")));
            }
        }
        let mut nodes = Vec::new();
        for (i, node) in raw.iter().enumerate() {
            let id = id_of(&node["id"])?;
            let list = |key: &str| -> Result<Vec<Value>> {
                match node.get(key) {
                    None => Ok(Vec::new()),
                    Some(Value::Array(a)) => Ok(a.clone()),
                    Some(_) => Err(Error::invalid(format!("node `{id}`: `{key}` must be an array"))),
                }
            };
            let mut chi = BTreeSet::new();
            for x in list("chi")? {
                let name = x.as_str().ok_or_else(|| Error::invalid(format!("node `{id}`: chi entries are variable names")))?;
                let v = q
                    .var_index(name)
                    .ok_or_else(|| Error::invalid(format!("node `{id}`: unknown variable `{name}`")))?;
                chi.insert(v);
            }
            let mut xi = BTreeSet::new();
            for x in list("xi")? {
                let a = x
                    .as_u64()
                    .filter(|&a| (a as usize) < q.atoms.len())
                    .ok_or_else(|| Error::invalid(format!("node `{id}`: xi entries are atom indices below {}", q.atoms.len())))?;
                xi.insert(a as usize);
            }
            let mut children = Vec::new();
            for c in list("children")? {
                let cid = id_of(&c)?;
                children.push(
                    *index
                        .get(&cid)
                        .ok_or_else(|| Error::invalid(format!("node `{id}`: unknown child `{cid}`")))?,
                );
            }
            debug_assert_eq!(nodes.len(), i);
            nodes.push(HdNode { id, chi, xi, children });
        }
        let root_id = id_of(v.get("root").ok_or_else(|| Error::invalid("decomposition needs a `root`"))?)?;
        let root = *index
            .get(&root_id)
            .ok_or_else(|| Error::invalid(format!("unknown root `{root_id}`")))?;
        let d = Decomposition { nodes, root };
        d.check_tree()?;
        Ok(d)
    }

    pub fn to_json(&self, q: &Query) -> Value {
        let nodes: Vec<Value> = self
            .nodes
            .iter()
            .map(|n| {
                json!({
                    "id": n.id,
                    "chi": n.chi.iter().map(|&v| q.vars[v].clone()).collect::<Vec<_>>(),
                    "xi": n.xi.iter().collect::<Vec<_>>(),
                    "children": n.children.iter().map(|&c| self.nodes[c].id.clone()).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({ "nodes": nodes, "root": self.nodes[self.root].id })
    }

    /// Every node reachable from the root exactly once.
    fn check_tree(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::invalid("decomposition has no nodes"));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(p) = stack.pop() {
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid(format!("node `{}` has more than one parent or lies on a cycle", self.nodes[p].id)));
            }
            stack.extend(self.nodes[p].children.iter().copied());
        }
        if let Some(p) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("node `{}` is not reachable from the root", self.nodes[p].id)));
        }
        Ok(())
    }

    /// One node holding every variable and every atom; valid for any query,
    /// with width equal to the atom count.
    pub fn single_bag(q: &Query) -> Decomposition {
        Decomposition {
            nodes: vec![HdNode {
                id: "all".into(),
                chi: (0..q.vars.len()).collect(),
                xi: (0..q.atoms.len()).collect(),
                children: Vec::new(),
            }],
            root: 0,
        }
    }

    /// Appends a leaf under `parent`.
    pub fn add_leaf(&mut self, parent: usize, base: &str, chi: BTreeSet<usize>, xi: BTreeSet<usize>) -> usize {
        let id = self.fresh_id(base);
        self.nodes.push(HdNode { id, chi, xi, children: Vec::new() });
        let new = self.nodes.len() - 1;
        self.nodes[parent].children.push(new);
        new
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `max |ξ(p)|`.
    pub fn width(&self) -> usize {
        self.nodes.iter().map(|n| n.xi.len()).max().unwrap_or(0)
    }

    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(p) = stack.pop() {
            out.push(p);
            stack.extend(self.nodes[p].children.iter().rev().copied());
        }
        out
    }

    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.nodes.len()];
        for (p, n) in self.nodes.iter().enumerate() {
            for &c in &n.children {
                parent[c] = Some(p);
            }
        }
        parent
    }

    /// The same tree hung from another node. Children keep their relative
    /// order; a former parent becomes the last child.
    pub fn reroot(&self, root: usize) -> Decomposition {
        let parent = self.parents();
        let mut nodes = self.nodes.clone();
        let mut cur = root;
        while let Some(p) = parent[cur] {
            nodes[p].children.retain(|&c| c != cur);
            nodes[cur].children.push(p);
            cur = p;
        }
        Decomposition { nodes, root }
    }

    fn fresh_id(&self, base: &str) -> String {
        let mut id = base.to_string();
        let mut k = 1;
        while self.nodes.iter().any(|n| n.id == id) {
            k += 1;
            id = format!("{base}_{k}");
        }
        id
    }
}

/// Checks the four decomposition conditions and returns the width.
pub fn validate_decomposition(q: &Query, d: &Decomposition) -> std::result::Result<usize, Violation> {
    let names = |vs: &mut dyn Iterator<Item = usize>| -> Vec<String> { vs.map(|v| q.vars[v].clone()).collect() };
    for i in 0..q.atoms.len() {
        let vars = q.atom_vars(i);
        if !d.nodes.iter().any(|n| vars.is_subset(&n.chi)) {
            return Err(Violation::AtomNotCovered { atom: i, text: q.atom_text(i) });
        }
    }
    let parent = d.parents();
    for v in 0..q.vars.len() {
        let holding: Vec<usize> = (0..d.len()).filter(|&p| d.nodes[p].chi.contains(&v)).collect();
        let edges = holding
            .iter()
            .filter(|&&p| parent[p].is_some_and(|u| d.nodes[u].chi.contains(&v)))
            .count();
        if !holding.is_empty() && edges + 1 != holding.len() {
            return Err(Violation::Disconnected {
                variable: q.vars[v].clone(),
                nodes: holding.iter().map(|&p| d.nodes[p].id.clone()).collect(),
            });
        }
    }
    let guard = |p: usize| -> BTreeSet<usize> { d.nodes[p].xi.iter().flat_map(|&a| q.atom_vars(a)).collect() };
    for (p, n) in d.nodes.iter().enumerate() {
        let g = guard(p);
        let loose: Vec<usize> = n.chi.difference(&g).copied().collect();
        if !loose.is_empty() {
            return Err(Violation::BagNotGuarded { node: n.id.clone(), variables: names(&mut loose.into_iter()) });
        }
    }
    // Bags below each node, bottom-up.
    let order = d.preorder();
    let mut below: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); d.len()];
    for &p in order.iter().rev() {
        let mut acc = BTreeSet::new();
        for &c in &d.nodes[p].children {
            acc.extend(d.nodes[c].chi.iter().copied());
            acc.extend(below[c].iter().copied());
        }
        below[p] = acc;
    }
    for &p in &order {
        let g = guard(p);
        let bad: Vec<usize> = g
            .intersection(&below[p])
            .filter(|v| !d.nodes[p].chi.contains(v))
            .copied()
            .collect();
        if !bad.is_empty() {
            return Err(Violation::Descendant { node: d.nodes[p].id.clone(), variables: names(&mut bad.into_iter()) });
        }
    }
    Ok(d.width())
}

/// Adds, for each atom `R` lacking a node with `var(R) ⊆ χ(p)` and
/// `R ∈ ξ(p)`, a leaf `χ = var(R)`, `ξ = {R}` under the first node (in
/// preorder) whose bag covers `var(R)`.
pub fn complete_decomposition(q: &Query, d: &Decomposition) -> Decomposition {
    let mut out = d.clone();
    let order = d.preorder();
    for a in 0..q.atoms.len() {
        let vars = q.atom_vars(a);
        if out.nodes.iter().any(|n| n.xi.contains(&a) && vars.is_subset(&n.chi)) {
            continue;
        }
        let Some(&host) = order.iter().find(|&&p| vars.is_subset(&d.nodes[p].chi)) else {
            continue;
        };
        out.add_leaf(host, &format!("atom{a}"), vars, BTreeSet::from([a]));
    }
    out
}

/// A join tree by GYO ear removal: one node per atom with `χ = var(R)`.
/// The ear removed at each step is the highest-indexed one, attached to
/// the lowest-indexed remaining atom covering its shared variables, so the
/// first atom ends up at the root.
pub fn gyo_join_tree(q: &Query) -> Result<Decomposition> {
    let k = q.atoms.len();
    if k == 0 {
        return Err(Error::invalid("query has no atoms"));
    }
    let vars: Vec<BTreeSet<usize>> = (0..k).map(|i| q.atom_vars(i)).collect();
    let mut alive: Vec<bool> = vec![true; k];
    let mut parent: Vec<Option<usize>> = vec![None; k];
    for _ in 1..k {
        let mut removed = false;
        for e in (0..k).rev().filter(|&e| alive[e]) {
            let shared: BTreeSet<usize> = vars[e]
                .iter()
                .filter(|v| (0..k).any(|f| f != e && alive[f] && vars[f].contains(v)))
                .copied()
                .collect();
            if let Some(f) = (0..k).find(|&f| f != e && alive[f] && shared.is_subset(&vars[f])) {
                parent[e] = Some(f);
                alive[e] = false;
                removed = true;
                break;
            }
        }
        if !removed {
            return Err(Error::NotAcyclic);
        }
    }
    let root = alive.iter().position(|&a| a).unwrap();
    let mut nodes: Vec<HdNode> = (0..k)
        .map(|i| HdNode {
            id: format!("a{i}"),
            chi: vars[i].clone(),
            xi: BTreeSet::from([i]),
            children: Vec::new(),
        })
        .collect();
    for e in 0..k {
        if let Some(f) = parent[e] {
            nodes[f].children.push(e);
        }
    }
    let d = Decomposition { nodes, root };
    debug_assert_eq!(validate_decomposition(q, &d), Ok(1));
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::fixtures;

    fn triangle_hd(q: &Query) -> Decomposition {
        Decomposition::from_json(
            &json!({"nodes": [
                {"id": "top", "chi": ["x","y","z"], "xi": [0, 1], "children": ["bottom"]},
                {"id": "bottom", "chi": ["x","z"], "xi": [2]}
            ], "root": "top"}),
            q,
        )
        .unwrap()
    }

    #[test]
    fn triangle_has_width_two_and_no_join_tree() {
        let q = fixtures::triangle();
        let d = triangle_hd(&q);
        assert_eq!(validate_decomposition(&q, &d), Ok(2));
        assert_eq!(complete_decomposition(&q, &d), d);
        assert_eq!(gyo_join_tree(&q), Err(Error::NotAcyclic));
    }

    #[test]
    fn running_example_join_tree_shape() {
        let q = fixtures::q1();
        let d = gyo_join_tree(&q).unwrap();
        assert_eq!(validate_decomposition(&q, &d), Ok(1));
        // G(x) at the root over E(x,y) and E(x,z), which carry C(y) and M(z).
        assert_eq!(d.root, 0);
        assert_eq!(d.nodes[0].children, vec![1, 2]);
        assert_eq!(d.nodes[1].children, vec![3]);
        assert_eq!(d.nodes[2].children, vec![4]);
        for p in 0..d.len() {
            assert_eq!(validate_decomposition(&q, &d.reroot(p)), Ok(1));
        }
    }

    #[test]
    fn reports_disconnected_variable() {
        let q = Query::parse("Q(x) :- A(x,y), B(y), C(x).").unwrap();
        let d = Decomposition::from_json(
            &json!({"nodes": [
                {"id": 0, "chi": ["x","y"], "xi": [0], "children": [1]},
                {"id": 1, "chi": ["y"], "xi": [1], "children": [2]},
                {"id": 2, "chi": ["x"], "xi": [2]}
            ], "root": 0}),
            &q,
        )
        .unwrap();
        match validate_decomposition(&q, &d) {
            Err(Violation::Disconnected { variable, .. }) => assert_eq!(variable, "x"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn completion_adds_leaves_and_is_idempotent() {
        let q = Query::parse("Q(x) :- A(x,y), B(y).").unwrap();
        let d = Decomposition::from_json(&json!({"nodes": [{"id": "r", "chi": ["x","y"], "xi": [0]}], "root": "r"}), &q).unwrap();
        assert_eq!(validate_decomposition(&q, &d), Ok(1));
        let c = complete_decomposition(&q, &d);
        assert_eq!(c.len(), 2);
        assert_eq!(validate_decomposition(&q, &c), Ok(1));
        assert_eq!(complete_decomposition(&q, &c), c);
    }

    #[test]
    fn structural_errors() {
        let q = fixtures::q1();
        let cyc = json!({"nodes": [{"id": 0, "children": [1]}, {"id": 1, "children": [0]}], "root": 0});
        assert!(Decomposition::from_json(&cyc, &q).is_err());
        let bad_var = json!({"nodes": [{"id": 0, "chi": ["w"]}], "root": 0});
        assert!(Decomposition::from_json(&bad_var, &q).is_err());
    }
}
