//! Structured DNNF circuits and their v-tree automata.
//!
//! Accepted trees have the shape of the v-tree, `@` at internal nodes and
//! `0`/`1` at the leaves, so each tree is a valuation of the v-tree
//! variables. States are v-tree nodes `u`, which accept every labeling of
//! the subtree, and pairs `(u, g)` that walk down to `f(g)` and then check
//! that gate `g` evaluates to 1.

use crate::automaton::{Transition, TreeAutomaton};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::fpras::{fpras_ta, Estimate};
use crate::tree::{Alphabet, Tree};
use fixedbitset::FixedBitSet;
use serde_json::Value;
use std::collections::{BTreeSet, HashMap, VecDeque};

/// A binary tree whose leaves are the variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VTree {
    pub vars: Vec<String>,
    /// `children[u]` is `None` at a leaf.
    pub children: Vec<Option<[usize; 2]>>,
    /// `leaf_var[u]` is the variable at leaf `u`.
    pub leaf_var: Vec<Option<usize>>,
    pub root: usize,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    var_leaf: Vec<usize>,
    below: Vec<FixedBitSet>,
}

impl VTree {
    /// A leaf is a variable name; an internal node is a two-element array.
    pub fn from_json(v: &Value) -> Result<VTree> {
        let mut vars = Vec::new();
        let mut children = Vec::new();
        let mut leaf_var = Vec::new();
        fn go(v: &Value, vars: &mut Vec<String>, ch: &mut Vec<Option<[usize; 2]>>, lv: &mut Vec<Option<usize>>) -> Result<usize> {
            match v {
                Value::String(s) => {
                    if vars.contains(s) {
                        return Err(Error::invalid(format!("variable `{s}` labels two v-tree leaves")));
                    }
                    vars.push(s.clone());
                    ch.push(None);
                    lv.push(Some(vars.len() - 1));
                    Ok(ch.len() - 1)
                }
                Value::Array(a) if a.len() == 2 => {
                    let l = go(&a[0], vars, ch, lv)?;
                    let r = go(&a[1], vars, ch, lv)?;
                    ch.push(Some([l, r]));
                    lv.push(None);
                    Ok(ch.len() - 1)
                }
                _ => Err(Error::invalid("a v-tree node is a variable name or a pair of v-trees")),
            }
        }
        let root = go(v, &mut vars, &mut children, &mut leaf_var)?;
        Ok(VTree::build(vars, children, leaf_var, root))
    }

    pub fn build(vars: Vec<String>, children: Vec<Option<[usize; 2]>>, leaf_var: Vec<Option<usize>>, root: usize) -> VTree {
        let n = children.len();
        let mut parent = vec![None; n];
        for (u, c) in children.iter().enumerate() {
            if let Some([l, r]) = c {
                parent[*l] = Some(u);
                parent[*r] = Some(u);
            }
        }
        let mut depth = vec![0; n];
        let mut order = vec![root];
        let mut i = 0;
        while i < order.len() {
            let u = order[i];
            if let Some([l, r]) = children[u] {
                depth[l] = depth[u] + 1;
                depth[r] = depth[u] + 1;
                order.push(l);
                order.push(r);
            }
            i += 1;
        }
        let mut below = vec![FixedBitSet::with_capacity(vars.len()); n];
        for &u in order.iter().rev() {
            match children[u] {
                Some([l, r]) => {
                    let mut b = below[l].clone();
                    b.union_with(&below[r]);
                    below[u] = b;
                }
                None => below[u].insert(leaf_var[u].unwrap()),
            }
        }
        let mut var_leaf = vec![0; vars.len()];
        for (u, v) in leaf_var.iter().enumerate() {
            if let Some(v) = v {
                var_leaf[*v] = u;
            }
        }
        VTree { vars, children, leaf_var, root, parent, depth, var_leaf, below }
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    /// `Vars(u)`.
    pub fn vars_below(&self, u: usize) -> &FixedBitSet {
        &self.below[u]
    }

    /// `u` is `a` or lies below it.
    pub fn is_descendant(&self, u: usize, a: usize) -> bool {
        let mut x = u;
        loop {
            if x == a {
                return true;
            }
            match self.parent[x] {
                Some(p) if self.depth[p] >= self.depth[a] => x = p,
                _ => return false,
            }
        }
    }

    /// The deepest node whose subtree holds every variable of `set`.
    fn lca(&self, set: &FixedBitSet) -> usize {
        let mut u = self.root;
        'down: loop {
            if let Some(cs) = self.children[u] {
                for c in cs {
                    if set.is_subset(&self.below[c]) {
                        u = c;
                        continue 'down;
                    }
                }
            }
            return u;
        }
    }

    /// The tree `t_ν` of a valuation indexed by variable.
    pub fn valuation_tree(&self, a: &Alphabet, nu: &[bool]) -> Tree {
        let at = a.get("@").unwrap();
        let (zero, one) = (a.get("0").unwrap(), a.get("1").unwrap());
        fn go(t: &VTree, u: usize, nu: &[bool], s: [crate::tree::Symbol; 3]) -> Tree {
            match t.children[u] {
                Some([l, r]) => Tree::node(s[0], vec![go(t, l, nu, s), go(t, r, nu, s)]),
                None => Tree::leaf(if nu[t.leaf_var[u].unwrap()] { s[2] } else { s[1] }),
            }
        }
        go(self, self.root, nu, [at, zero, one])
    }

    /// The valuation read off a tree of the v-tree's shape.
    pub fn tree_valuation(&self, a: &Alphabet, t: &Tree) -> Result<Vec<bool>> {
        let mut nu = vec![false; self.vars.len()];
        let one = a.get("1");
        let mut stack = vec![(t, self.root)];
        while let Some((t, u)) = stack.pop() {
            match self.children[u] {
                Some([l, r]) if t.children.len() == 2 => {
                    stack.push((&t.children[0], l));
                    stack.push((&t.children[1], r));
                }
                None if t.children.is_empty() => nu[self.leaf_var[u].unwrap()] = Some(t.label) == one,
                _ => return Err(Error::invalid("tree does not have the v-tree's shape")),
            }
        }
        Ok(nu)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Gate {
    /// Left and right inputs.
    And(usize, usize),
    Or(Vec<usize>),
    Lit { var: usize, positive: bool },
}

/// An NNF circuit over the variables of a v-tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    pub ids: Vec<String>,
    pub gates: Vec<Gate>,
    pub output: usize,
    /// Supplied structuredness witnesses, as v-tree nodes.
    pub witness: HashMap<usize, usize>,
}

impl Circuit {
    /// `{"gates": [{id, type: and|or|lit, inputs, var, sign, vnode?}], "output"}`.
    /// `vnode` is an optional witness address over `1` (left) and `2` (right).
    pub fn from_json(v: &Value, t: &VTree) -> Result<Circuit> {
        let raw = v
            .get("gates")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::invalid("circuit needs a `gates` array"))?;
        let id_of = |x: &Value| -> Result<String> {
            match x {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                _ => Err(Error::invalid("gate ids are strings or integers")),
            }
        };
        let mut index = HashMap::new();
        let mut ids = Vec::new();
        for g in raw {
            let id = id_of(g.get("id").ok_or_else(|| Error::invalid("gate without `id`"))?)?;
            if index.insert(id.clone(), ids.len()).is_some() {
                return Err(Error::invalid(format!("duplicate gate id `{id}`")));
            }
            ids.push(id);
        }
        let mut gates = Vec::new();
        let mut witness = HashMap::new();
        for (i, g) in raw.iter().enumerate() {
            let id = &ids[i];
            let inputs = || -> Result<Vec<usize>> {
                g.get("inputs")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::invalid(format!("gate `{id}` needs `inputs`")))?
                    .iter()
                    .map(|x| {
                        let s = id_of(x)?;
                        index.get(&s).copied().ok_or_else(|| Error::invalid(format!("gate `{id}`: unknown input `{s}`")))
                    })
                    .collect()
            };
            let gate = match g.get("type").and_then(Value::as_str) {
                Some("and") => {
                    let ins = inputs()?;
                    if ins.len() != 2 {
                        return Err(Error::invalid(format!("and-gate `{id}` must have exactly two inputs")));
                    }
                    Gate::And(ins[0], ins[1])
                }
                Some("or") => {
                    let ins = inputs()?;
                    if ins.is_empty() {
                        return Err(Error::invalid(format!("or-gate `{id}` has no inputs")));
                    }
                    Gate::Or(ins)
                }
                Some("lit") => {
                    let name = g.get("var").and_then(Value::as_str).ok_or_else(|| Error::invalid(format!("literal `{id}` needs `var`")))?;
                    let var = t
                        .vars
                        .iter()
                        .position(|x| x == name)
                        .ok_or_else(|| Error::invalid(format!("literal `{id}`: `{name}` is not a v-tree variable")))?;
                    Gate::Lit { var, positive: g.get("sign").and_then(Value::as_bool).unwrap_or(true) }
                }
                _ => return Err(Error::invalid(format!("gate `{id}` has no valid `type`"))),
            };
            if let Some(addr) = g.get("vnode").and_then(Value::as_str) {
                let mut u = t.root;
                for ch in addr.chars() {
                    let k = match ch {
                        '1' => 0,
                        '2' => 1,
                        _ => return Err(Error::invalid(format!("gate `{id}`: bad v-tree address `{addr}`"))),
                    };
                    u = t.children[u].ok_or_else(|| Error::invalid(format!("gate `{id}`: address `{addr}` leaves the v-tree")))?[k];
                }
                witness.insert(i, u);
            }
            gates.push(gate);
        }
        let output = index
            .get(&id_of(v.get("output").ok_or_else(|| Error::invalid("circuit needs an `output`"))?)?)
            .copied()
            .ok_or_else(|| Error::invalid("unknown output gate"))?;
        Ok(Circuit { ids, gates, output, witness })
    }

    fn inputs(&self, g: usize) -> Vec<usize> {
        match &self.gates[g] {
            Gate::And(a, b) => vec![*a, *b],
            Gate::Or(v) => v.clone(),
            Gate::Lit { .. } => Vec::new(),
        }
    }

    /// Gates in an order where inputs come first; errors on a cycle.
    pub fn topological(&self) -> Result<Vec<usize>> {
        let n = self.gates.len();
        let mut state = vec![0u8; n];
        let mut order = Vec::with_capacity(n);
        for s in 0..n {
            if state[s] != 0 {
                continue;
            }
            let mut stack = vec![(s, false)];
            while let Some((g, done)) = stack.pop() {
                if done {
                    state[g] = 2;
                    order.push(g);
                    continue;
                }
                match state[g] {
                    2 => continue,
                    1 => return Err(Error::invalid(format!("the wires through gate `{}` form a cycle", self.ids[g]))),
                    _ => {}
                }
                state[g] = 1;
                stack.push((g, true));
                for i in self.inputs(g) {
                    match state[i] {
                        0 => stack.push((i, false)),
                        1 => return Err(Error::invalid(format!("the wires through gate `{}` form a cycle", self.ids[i]))),
                        _ => {}
                    }
                }
            }
        }
        Ok(order)
    }

    /// `ν(C)`.
    pub fn eval(&self, nu: &[bool], order: &[usize]) -> bool {
        let mut val = vec![false; self.gates.len()];
        for &g in order {
            val[g] = match &self.gates[g] {
                Gate::And(a, b) => val[*a] && val[*b],
                Gate::Or(v) => v.iter().any(|&i| val[i]),
                Gate::Lit { var, positive } => nu[*var] == *positive,
            };
        }
        val[self.output]
    }
}

/// Model count over the v-tree variables by truth table.
pub fn brute_dnnf_count(c: &Circuit, t: &VTree, budget: u64) -> Result<u64> {
    let k = t.vars.len();
    if k >= 63 || (1u64 << k) > budget {
        return Err(Error::Budget(format!("2^{k} valuations exceed the budget {budget}")));
    }
    let order = c.topological()?;
    let mut nu = vec![false; k];
    let mut count = 0;
    for mask in 0u64..(1 << k) {
        for (i, x) in nu.iter_mut().enumerate() {
            *x = mask >> i & 1 == 1;
        }
        if c.eval(&nu, &order) {
            count += 1;
        }
    }
    Ok(count)
}

/// The automaton `T_C` with `|L_n(T_C)|` equal to the model count at
/// `n = |t|`, plus the witness `f` found for each ∧-gate and literal.
pub struct DnnfAutomaton {
    pub automaton: TreeAutomaton,
    pub n: usize,
    pub witness: HashMap<usize, usize>,
}

/// Checks decomposability and structuredness, infers `f` (the deepest
/// v-tree node splitting each ∧-gate's inputs) and builds `T_C`. When the
/// output gate is not an ∧-gate, the initial states are `(root, g)` for
/// the ∧-gates and literals reachable from it through ∨-gates only.
pub fn dnnf_to_ta(c: &Circuit, t: &VTree) -> Result<DnnfAutomaton> {
    let order = c.topological()?;
    let k = t.vars.len();
    let mut vars = vec![FixedBitSet::with_capacity(k); c.gates.len()];
    for &g in &order {
        let mut s = FixedBitSet::with_capacity(k);
        match &c.gates[g] {
            Gate::Lit { var, .. } => s.insert(*var),
            _ => {
                for i in c.inputs(g) {
                    s.union_with(&vars[i]);
                }
            }
        }
        vars[g] = s;
    }
    let mut f: HashMap<usize, usize> = HashMap::new();
    for &g in &order {
        let u = match &c.gates[g] {
            Gate::Lit { var, .. } => t.var_leaf[*var],
            Gate::And(a, b) => {
                if !vars[*a].is_disjoint(&vars[*b]) {
                    return Err(Error::invalid(format!(
                        "and-gate `{}` is not decomposable: its inputs share variables",
                        c.ids[g]
                    )));
                }
                let u = t.lca(&vars[g]);
                let ok = t.children[u].is_some_and(|[l, r]| vars[*a].is_subset(t.vars_below(l)) && vars[*b].is_subset(t.vars_below(r)));
                if !ok {
                    return Err(Error::invalid(format!("and-gate `{}` does not respect the v-tree", c.ids[g])));
                }
                u
            }
            Gate::Or(_) => continue,
        };
        if let Some(&w) = c.witness.get(&g) {
            if w != u {
                return Err(Error::invalid(format!("supplied v-tree node for gate `{}` does not witness structuredness", c.ids[g])));
            }
        }
        f.insert(g, u);
    }
    // D(g): ∧-gates and literals feeding g through ∨-gates only.
    let through_or = |starts: Vec<usize>| -> Vec<usize> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut stack = starts;
        while let Some(x) = stack.pop() {
            if !seen.insert(x) {
                continue;
            }
            match &c.gates[x] {
                Gate::Or(ins) => stack.extend(ins.iter().copied()),
                _ => {
                    out.insert(x);
                }
            }
        }
        out.into_iter().collect()
    };

    let mut alphabet = Alphabet::new();
    let at = alphabet.intern("@");
    let zero = alphabet.intern("0");
    let one = alphabet.intern("1");
    // State keys: (u, None) plain, (u, Some(g)) pair.
    let mut index: HashMap<(usize, Option<usize>), usize> = HashMap::new();
    let mut names = Vec::new();
    let mut queue = VecDeque::new();
    let mut transitions = Vec::new();
    let mut state = |key: (usize, Option<usize>), names: &mut Vec<String>, queue: &mut VecDeque<((usize, Option<usize>), usize)>| -> usize {
        *index.entry(key).or_insert_with(|| {
            names.push(match key.1 {
                None => format!("u{}", key.0),
                Some(g) => format!("u{}/{}", key.0, c.ids[g]),
            });
            queue.push_back((key, names.len() - 1));
            names.len() - 1
        })
    };
    let initial_gates = through_or(vec![c.output]);
    let initials: Vec<usize> = initial_gates.iter().map(|&g| state((t.root, Some(g)), &mut names, &mut queue)).collect();
    while let Some((key, from)) = queue.pop_front() {
        let (u, g) = key;
        match (g, t.children[u]) {
            (None, Some([l, r])) => {
                let cs = vec![state((l, None), &mut names, &mut queue), state((r, None), &mut names, &mut queue)];
                transitions.push(Transition { from, symbol: at, children: cs });
            }
            (None, None) => {
                transitions.push(Transition { from, symbol: zero, children: vec![] });
                transitions.push(Transition { from, symbol: one, children: vec![] });
            }
            (Some(g), kids) => {
                let fg = f[&g];
                match kids {
                    Some([l, r]) if fg != u => {
                        let cs = if t.is_descendant(fg, l) {
                            vec![state((l, Some(g)), &mut names, &mut queue), state((r, None), &mut names, &mut queue)]
                        } else {
                            vec![state((l, None), &mut names, &mut queue), state((r, Some(g)), &mut names, &mut queue)]
                        };
                        transitions.push(Transition { from, symbol: at, children: cs });
                    }
                    Some([l, r]) => {
                        let d = through_or(c.inputs(g));
                        for &g1 in d.iter().filter(|&&x| t.is_descendant(f[&x], l)) {
                            for &g2 in d.iter().filter(|&&x| t.is_descendant(f[&x], r)) {
                                let cs = vec![state((l, Some(g1)), &mut names, &mut queue), state((r, Some(g2)), &mut names, &mut queue)];
                                transitions.push(Transition { from, symbol: at, children: cs });
                            }
                        }
                    }
                    None => {
                        debug_assert_eq!(fg, u);
                        if let Gate::Lit { positive, .. } = c.gates[g] {
                            transitions.push(Transition { from, symbol: if positive { one } else { zero }, children: vec![] });
                        }
                    }
                }
            }
        }
    }
    let base = TreeAutomaton::new(2, alphabet, names, initials[0], transitions)?;
    let automaton = base.with_initial_states(&initials)?;
    Ok(DnnfAutomaton { automaton, n: t.len(), witness: f })
}

/// Model-count estimate through the automaton.
pub fn count_dnnf(c: &Circuit, t: &VTree, cfg: &Config) -> Result<Estimate> {
    let d = dnnf_to_ta(c, t)?;
    fpras_ta(&d.automaton, d.n, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::brute_slice;
    use serde_json::json;

    fn example() -> (Circuit, VTree) {
        let t = VTree::from_json(&json!(["x", ["y", "z"]])).unwrap();
        let c = Circuit::from_json(
            &json!({"gates": [
                {"id": "x", "type": "lit", "var": "x"},
                {"id": "nx", "type": "lit", "var": "x", "sign": false},
                {"id": "y", "type": "lit", "var": "y"},
                {"id": "z", "type": "lit", "var": "z"},
                {"id": "a1", "type": "and", "inputs": ["x", "y"]},
                {"id": "a2", "type": "and", "inputs": ["nx", "z"]},
                {"id": "out", "type": "or", "inputs": ["a1", "a2"]}
            ], "output": "out"}),
            &t,
        )
        .unwrap();
        (c, t)
    }

    #[test]
    fn mux_has_four_models() {
        let (c, t) = example();
        assert_eq!(brute_dnnf_count(&c, &t, 1 << 20).unwrap(), 4);
        let d = dnnf_to_ta(&c, &t).unwrap();
        let slice = brute_slice(&d.automaton, d.n, 1 << 20).unwrap();
        assert_eq!(slice.len(), 4);
        let order = c.topological().unwrap();
        for tree in &slice.trees {
            let nu = t.tree_valuation(&d.automaton.alphabet, tree).unwrap();
            assert!(c.eval(&nu, &order));
            assert_eq!(&t.valuation_tree(&d.automaton.alphabet, &nu), tree);
        }
    }

    #[test]
    fn single_literal() {
        let t = VTree::from_json(&json!("x")).unwrap();
        let c = Circuit::from_json(&json!({"gates": [{"id": 0, "type": "lit", "var": "x"}], "output": 0}), &t).unwrap();
        let d = dnnf_to_ta(&c, &t).unwrap();
        assert_eq!(brute_slice(&d.automaton, 1, 100).unwrap().len(), 1);
    }

    #[test]
    fn rejects_violations() {
        let t = VTree::from_json(&json!(["x", "y"])).unwrap();
        let shared = json!({"gates": [
            {"id": "a", "type": "lit", "var": "x"},
            {"id": "b", "type": "lit", "var": "x", "sign": false},
            {"id": "g", "type": "and", "inputs": ["a", "b"]}
        ], "output": "g"});
        let e = dnnf_to_ta(&Circuit::from_json(&shared, &t).unwrap(), &t).err().unwrap();
        assert!(e.to_string().contains("`g`"), "{e}");
        let swapped = json!({"gates": [
            {"id": "a", "type": "lit", "var": "y"},
            {"id": "b", "type": "lit", "var": "x"},
            {"id": "h", "type": "and", "inputs": ["a", "b"]}
        ], "output": "h"});
        let e = dnnf_to_ta(&Circuit::from_json(&swapped, &t).unwrap(), &t).err().unwrap();
        assert!(e.to_string().contains("`h`"), "{e}");
    }
}
