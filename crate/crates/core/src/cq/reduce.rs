//! Parsimonious reduction from a conjunctive query with a hypertree
//! decomposition to a tree automaton.
//!
//! A state at node `p` is a consistent choice of facts for the guard atoms
//! `ξ(p)`, kept as the induced assignment of their variables. The label of
//! `p` is the projection of that assignment onto the output variables in
//! `χ(p)`. Trees accepted at size `n = |N|` have the shape of the
//! decomposition and correspond one-to-one with answers.

use super::decomp::{complete_decomposition, validate_decomposition, Decomposition};
use super::{bind_atoms, bind_fact, unbind, Answer, Database, Query};
use crate::automaton::{Transition, TreeAutomaton};
use crate::error::{Error, Result};
use crate::tree::{Alphabet, Symbol, Tree};
use std::collections::{BTreeSet, HashMap};

#[derive(Clone, Debug)]
struct LabelInfo {
    node: usize,
    /// `z̄ ↦ b̄` over the output variables of the node.
    values: Vec<u32>,
}

/// The automaton of a query/database pair plus what is needed to map
/// accepted trees back to answers.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub automaton: TreeAutomaton,
    /// Slice size: the node count of the completed decomposition.
    pub n: usize,
    pub width: usize,
    pub query: Query,
    pub decomposition: Decomposition,
    labels: Vec<LabelInfo>,
    label_index: HashMap<(usize, Vec<u32>), Symbol>,
    constants: Vec<String>,
}

/// Per-node construction scratch.
struct NodeStates {
    guard: Vec<usize>,
    bundles: Vec<Vec<u32>>,
    live: Vec<bool>,
    /// `(from, label, children as (node, local state))`.
    transitions: Vec<(usize, Symbol, Vec<(usize, usize)>)>,
}

/// Builds the automaton for `(Q, D)` from a valid decomposition of width at
/// most `k`. The decomposition is completed first; its node count is the
/// slice size. `budget` caps the fact combinations scanned.
pub fn reduce_cq_to_ta(q: &Query, db: &Database, hd: &Decomposition, k: usize, budget: u64) -> Result<Reduction> {
    validate_decomposition(q, hd).map_err(|v| Error::invalid(format!("not a hypertree decomposition: {v}")))?;
    let d = complete_decomposition(q, hd);
    let width = validate_decomposition(q, &d).expect("completion preserves validity");
    if width > k {
        return Err(Error::invalid(format!("decomposition width {width} exceeds k = {k}")));
    }
    let atoms = bind_atoms(q, db)?;
    let head = q.head_vars();
    let nv = q.vars.len();
    let mut steps: u64 = 0;
    let mut tick = |n: u64| -> Result<()> {
        steps += n;
        if steps > budget {
            Err(Error::Budget(format!("reduction scanned more than {budget} fact combinations")))
        } else {
            Ok(())
        }
    };

    let mut alphabet = Alphabet::new();
    let mut labels: Vec<LabelInfo> = Vec::new();
    let mut label_index: HashMap<(usize, Vec<u32>), Symbol> = HashMap::new();
    let out_vars: Vec<Vec<usize>> = d.nodes.iter().map(|n| n.chi.intersection(&head).copied().collect()).collect();

    let order = d.preorder();
    let mut per: Vec<Option<NodeStates>> = (0..d.len()).map(|_| None).collect();
    for &p in order.iter().rev() {
        let node = &d.nodes[p];
        let guard: Vec<usize> = node
            .xi
            .iter()
            .flat_map(|&a| q.atom_vars(a))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        // S(p): consistent fact choices for the guard atoms.
        let xi: Vec<usize> = node.xi.iter().copied().collect();
        let mut bundles = BTreeSet::new();
        let mut map = vec![None; nv];
        let mut trail = Vec::new();
        fn enumerate(
            i: usize,
            xi: &[usize],
            atoms: &[super::BoundAtom],
            guard: &[usize],
            map: &mut [Option<u32>],
            trail: &mut Vec<usize>,
            out: &mut BTreeSet<Vec<u32>>,
            tick: &mut dyn FnMut(u64) -> Result<()>,
        ) -> Result<()> {
            if i == xi.len() {
                out.insert(guard.iter().map(|&v| map[v].expect("guard variable bound")).collect());
                return Ok(());
            }
            let a = &atoms[xi[i]];
            tick(a.tuples.len() as u64)?;
            for fact in a.tuples {
                let mark = trail.len();
                if bind_fact(&a.args, fact, map, trail) {
                    enumerate(i + 1, xi, atoms, guard, map, trail, out, tick)?;
                    unbind(map, trail, mark);
                }
            }
            Ok(())
        }
        enumerate(0, &xi, &atoms, &guard, &mut map, &mut trail, &mut bundles, &mut tick)?;
        let bundles: Vec<Vec<u32>> = bundles.into_iter().collect();

        let mut transitions = Vec::new();
        for (b, bundle) in bundles.iter().enumerate() {
            let values: Vec<u32> = out_vars[p]
                .iter()
                .map(|v| bundle[guard.binary_search(v).expect("χ(p) is guarded")])
                .collect();
            let key = (p, values);
            let mut map = vec![None; nv];
            for (&v, &c) in guard.iter().zip(bundle) {
                map[v] = Some(c);
            }
            let mut trail = Vec::new();
            let mut chosen = Vec::new();
            let kids: Vec<(usize, &NodeStates)> = node
                .children
                .iter()
                .map(|&c| (c, per[c].as_ref().expect("children come first in postorder")))
                .collect();
            fn combine(
                i: usize,
                kids: &[(usize, &NodeStates)],
                map: &mut [Option<u32>],
                trail: &mut Vec<usize>,
                chosen: &mut Vec<(usize, usize)>,
                emit: &mut dyn FnMut(&[(usize, usize)]) -> Result<()>,
                tick: &mut dyn FnMut(u64) -> Result<()>,
            ) -> Result<()> {
                if i == kids.len() {
                    return emit(chosen);
                }
                let (c, st) = kids[i];
                tick(st.bundles.len() as u64)?;
                for (j, bundle) in st.bundles.iter().enumerate() {
                    if !st.live[j] {
                        continue;
                    }
                    let mark = trail.len();
                    let ok = st.guard.iter().zip(bundle).all(|(&v, &x)| match map[v] {
                        Some(y) => y == x,
                        None => {
                            map[v] = Some(x);
                            trail.push(v);
                            true
                        }
                    });
                    if ok {
                        chosen.push((c, j));
                        combine(i + 1, kids, map, trail, chosen, emit, tick)?;
                        chosen.pop();
                    }
                    unbind(map, trail, mark);
                }
                Ok(())
            }
            let mut found: Vec<Vec<(usize, usize)>> = Vec::new();
            let mut emit = |ch: &[(usize, usize)]| -> Result<()> {
                found.push(ch.to_vec());
                Ok(())
            };
            combine(0, &kids, &mut map, &mut trail, &mut chosen, &mut emit, &mut tick)?;
            if found.is_empty() {
                continue;
            }
            let symbol = match label_index.get(&key) {
                Some(&s) => s,
                None => {
                    let names: Vec<String> = out_vars[p]
                        .iter()
                        .zip(&key.1)
                        .map(|(&v, &c)| format!("{}={}", q.vars[v], db.constant_name(c)))
                        .collect();
                    let s = alphabet.intern(&format!("{}[{}]", node.id, names.join(",")));
                    labels.push(LabelInfo { node: p, values: key.1.clone() });
                    label_index.insert(key, s);
                    s
                }
            };
            transitions.extend(found.into_iter().map(|ch| (b, symbol, ch)));
        }
        let mut live = vec![false; bundles.len()];
        for t in &transitions {
            live[t.0] = true;
        }
        per[p] = Some(NodeStates { guard, bundles, live, transitions });
    }

    // Number live states node by node in preorder.
    let per: Vec<NodeStates> = per.into_iter().map(|x| x.unwrap()).collect();
    let mut global: Vec<Vec<Option<usize>>> = per.iter().map(|s| vec![None; s.bundles.len()]).collect();
    let mut states = Vec::new();
    for &p in &order {
        let st = &per[p];
        for (j, bundle) in st.bundles.iter().enumerate() {
            if st.live[j] {
                global[p][j] = Some(states.len());
                let parts: Vec<String> = st
                    .guard
                    .iter()
                    .zip(bundle)
                    .map(|(&v, &c)| format!("{}={}", q.vars[v], db.constant_name(c)))
                    .collect();
                states.push(format!("{}:{}", d.nodes[p].id, parts.join(",")));
            }
        }
    }
    let mut transitions = Vec::new();
    for (p, st) in per.iter().enumerate() {
        for (from, symbol, kids) in &st.transitions {
            transitions.push(Transition {
                from: global[p][*from].unwrap(),
                symbol: *symbol,
                children: kids.iter().map(|&(c, j)| global[c][j].unwrap()).collect(),
            });
        }
    }
    let roots: Vec<usize> = global[d.root].iter().flatten().copied().collect();
    let arity = d.nodes.iter().map(|n| n.children.len()).max().unwrap_or(0).max(1);
    let automaton = if states.is_empty() {
        TreeAutomaton::new(arity, alphabet, vec!["empty".into()], 0, Vec::new())?
    } else {
        TreeAutomaton::new(arity, alphabet, states, 0, transitions)?.with_initial_states(&roots)?
    };
    Ok(Reduction {
        automaton,
        n: d.len(),
        width,
        query: q.clone(),
        decomposition: d,
        labels,
        label_index,
        constants: db.constants().to_vec(),
    })
}

impl Reduction {
    /// Output variables of node `p`, ascending.
    fn out_vars(&self, p: usize) -> Vec<usize> {
        let head = self.query.head_vars();
        self.decomposition.nodes[p].chi.intersection(&head).copied().collect()
    }

    /// Reads the answer tuple off an accepted tree.
    pub fn decode_answer(&self, tree: &Tree) -> Result<Answer> {
        let mut map: Vec<Option<u32>> = vec![None; self.query.vars.len()];
        let mut stack = vec![(tree, self.decomposition.root)];
        while let Some((t, p)) = stack.pop() {
            let info = self
                .labels
                .get(t.label.0 as usize)
                .ok_or_else(|| Error::invalid("tree label is not a reduction label"))?;
            let node = &self.decomposition.nodes[p];
            if info.node != p || t.children.len() != node.children.len() {
                return Err(Error::invalid(format!(
                    "tree does not follow the decomposition shape at node `{}`",
                    node.id
                )));
            }
            for (v, &c) in self.out_vars(p).into_iter().zip(&info.values) {
                match map[v] {
                    Some(x) if x != c => {
                        return Err(Error::invalid(format!(
                            "labels assign two values to `{}`",
                            self.query.vars[v]
                        )))
                    }
                    _ => map[v] = Some(c),
                }
            }
            stack.extend(t.children.iter().zip(&node.children).map(|(c, &pc)| (c, pc)));
        }
        self.query
            .head
            .iter()
            .map(|&v| {
                map[v]
                    .map(|c| self.constants[c as usize].clone())
                    .ok_or_else(|| Error::invalid(format!("no label assigns `{}`", self.query.vars[v])))
            })
            .collect()
    }

    /// The tree `t_ā` for an answer tuple.
    pub fn answer_tree(&self, answer: &[String]) -> Result<Tree> {
        if answer.len() != self.query.head.len() {
            return Err(Error::invalid("answer arity differs from the head"));
        }
        let mut map: HashMap<usize, u32> = HashMap::new();
        for (&v, c) in self.query.head.iter().zip(answer) {
            let id = self
                .constants
                .iter()
                .position(|x| x == c)
                .ok_or_else(|| Error::invalid(format!("`{c}` is not a database constant")))? as u32;
            if *map.entry(v).or_insert(id) != id {
                return Err(Error::invalid("answer gives a repeated head variable two values"));
            }
        }
        fn build(r: &Reduction, p: usize, map: &HashMap<usize, u32>) -> Result<Tree> {
            let values: Vec<u32> = r.out_vars(p).iter().map(|v| map[v]).collect();
            let label = *r
                .label_index
                .get(&(p, values))
                .ok_or_else(|| Error::invalid("tuple is not an answer"))?;
            let kids = r.decomposition.nodes[p]
                .children
                .iter()
                .map(|&c| build(r, c, map))
                .collect::<Result<Vec<_>>>()?;
            Ok(Tree::node(label, kids))
        }
        build(self, self.decomposition.root, &map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::{brute_cq_count, fixtures, gyo_join_tree};
    use crate::oracles::brute_slice;

    #[test]
    fn running_example_has_one_answer_tree() {
        let (q, db) = (fixtures::q1(), fixtures::d1());
        let r = reduce_cq_to_ta(&q, &db, &gyo_join_tree(&q).unwrap(), 1, 1_000_000).unwrap();
        assert_eq!(r.n, 5);
        let slice = brute_slice(&r.automaton, 5, 1_000_000).unwrap();
        assert_eq!(slice.len(), 1);
        assert_eq!(r.decode_answer(&slice.trees[0]).unwrap(), vec!["b".to_string()]);
        assert_eq!(r.answer_tree(&["b".to_string()]).unwrap(), slice.trees[0]);
        let other = r.answer_tree(&["a".to_string()]);
        assert!(other.map_or(true, |t| !r.automaton.accepts(&t).unwrap()));
    }

    #[test]
    fn triangle_bijection() {
        let q = fixtures::triangle();
        let db = Database::parse("R(1,2). R(2,3). R(3,1). R(1,1). S(2,3). S(3,1). S(1,2). S(1,1). T(3,1). T(1,2). T(1,1).").unwrap();
        let hd = Decomposition::from_json(
            &serde_json::json!({"nodes": [
                {"id": "top", "chi": ["x","y","z"], "xi": [0, 1], "children": ["bottom"]},
                {"id": "bottom", "chi": ["x","z"], "xi": [2]}
            ], "root": "top"}),
            &q,
        )
        .unwrap();
        assert!(reduce_cq_to_ta(&q, &db, &hd, 1, 1_000_000).is_err());
        let r = reduce_cq_to_ta(&q, &db, &hd, 2, 1_000_000).unwrap();
        let truth = brute_cq_count(&q, &db, 1_000_000).unwrap();
        let slice = brute_slice(&r.automaton, r.n, 1_000_000).unwrap();
        let decoded: BTreeSet<Answer> = slice.trees.iter().map(|t| r.decode_answer(t).unwrap()).collect();
        assert_eq!(decoded.len(), slice.len());
        assert_eq!(decoded, truth.answers);
    }

    #[test]
    fn empty_relation_and_boolean_query() {
        let q = Query::parse("Q() :- E(x,y), F(y).").unwrap();
        let hd = gyo_join_tree(&q).unwrap();
        let db = Database::parse("E(a,b). F/1.").unwrap();
        let r = reduce_cq_to_ta(&q, &db, &hd, 1, 1000).unwrap();
        assert!(brute_slice(&r.automaton, r.n, 1000).unwrap().is_empty());
        let db = Database::parse("E(a,b). E(a,c). F(b). F(c).").unwrap();
        let r = reduce_cq_to_ta(&q, &db, &hd, 1, 1000).unwrap();
        let slice = brute_slice(&r.automaton, r.n, 1000).unwrap();
        assert_eq!(slice.len(), 1);
        assert_eq!(r.decode_answer(&slice.trees[0]).unwrap(), Answer::new());
        assert!(reduce_cq_to_ta(&q, &Database::parse("E(a,b).").unwrap(), &hd, 1, 1000).is_err());
    }
}
