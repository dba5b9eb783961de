//! Completion counting for partial trees through succinct NFAs.
//!
//! Holes of a partial tree built by min-hole expansion hang off a single
//! root-to-leaf chain, the main path. Reading the hole fillers along that
//! chain turns the completion set into the language of a leveled NFA whose
//! labels are tree languages `T(r^h)`.

use crate::automaton::{StateSet, TreeAutomaton};
use crate::error::{Error, Result};
use crate::nfa::{LabelOracle, NfaTransition, SuccinctNfa};
use crate::oracles::brute_slice;
use crate::partial::{Layout, PartialTree, Token};
use crate::rng::Rng;
use crate::tree::{Alphabet, Tree};
use crate::unroll::Unrolled;
use num_bigint::BigUint;
use num_traits::Zero;
use rand::Rng as _;
use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::rc::Rc;

/// A tree together with the set of base states accepting it.
#[derive(Clone, Debug)]
pub struct SketchTree {
    pub tree: Tree,
    pub states: StateSet,
}

impl SketchTree {
    pub fn new(a: &TreeAutomaton, tree: Tree) -> Self {
        let states = a.state_set(&tree);
        SketchTree { tree, states }
    }

    pub fn size(&self) -> usize {
        self.tree.size()
    }
}

impl PartialEq for SketchTree {
    fn eq(&self, other: &Self) -> bool {
        self.tree == other.tree
    }
}

impl Eq for SketchTree {}

impl Hash for SketchTree {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.tree.hash(h);
    }
}

impl PartialOrd for SketchTree {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SketchTree {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.tree.cmp(&other.tree)
    }
}

/// Transition labels of a partition NFA.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PLabel {
    /// The singleton bootstrap set `{&}`.
    Amp,
    /// `T(state^size)`.
    Trees { state: u32, size: u32 },
}

/// Letters of a partition NFA word.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    Amp,
    Tree(Rc<SketchTree>),
}

/// Membership shared by every tree-label oracle.
pub fn letter_in(label: PLabel, item: &Letter) -> bool {
    match (label, item) {
        (PLabel::Amp, Letter::Amp) => true,
        (PLabel::Trees { state, size }, Letter::Tree(t)) => {
            t.size() == size as usize && t.states.contains(state as usize)
        }
        _ => false,
    }
}

/// Overlap test shared by every tree-label oracle.
pub fn labels_may_overlap(a: PLabel, b: PLabel) -> bool {
    match (a, b) {
        (PLabel::Amp, PLabel::Amp) => true,
        (PLabel::Trees { size: x, .. }, PLabel::Trees { size: y, .. }) => x == y,
        _ => false,
    }
}

/// `log2` of the number of binary trees of the given size over `sigma` symbols.
pub fn log2_tree_bound(size: usize, sigma: usize) -> f64 {
    size as f64 * (2.0 + (sigma.max(1) as f64).log2())
}

/// The chain of hole parents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MainPath {
    /// Token positions of the path vertices `p_1..p_k`.
    pub vertices: Vec<usize>,
    /// Token positions of the holes `u_1..u_k`.
    pub holes: Vec<usize>,
    /// Hole sizes `i_ℓ`.
    pub hole_sizes: Vec<usize>,
    /// Full subtree sizes `j_ℓ` at the vertices.
    pub vertex_sizes: Vec<usize>,
    /// The last two holes share a parent, so `p_k = u_k`.
    pub shared_end: bool,
}

impl MainPath {
    pub fn len(&self) -> usize {
        self.holes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holes.is_empty()
    }
}

/// Orders the holes so that each hole's parent is an ancestor of the next
/// hole; two holes sharing a parent come last, left first.
pub fn main_path(t: &PartialTree) -> Result<MainPath> {
    main_path_with(t, &t.layout())
}

fn main_path_with(t: &PartialTree, lay: &Layout) -> Result<MainPath> {
    let mut holes = t.holes();
    let pdepth = |h: usize| {
        if lay.parent[h] == usize::MAX {
            0
        } else {
            lay.depth[lay.parent[h]] + 1
        }
    };
    holes.sort_by_key(|&h| (pdepth(h), h));
    let k = holes.len();
    if k == 1 && lay.parent[holes[0]] == usize::MAX {
        return Ok(MainPath {
            vertices: vec![holes[0]],
            holes: holes.clone(),
            hole_sizes: vec![lay.size[holes[0]]],
            vertex_sizes: vec![lay.size[holes[0]]],
            shared_end: false,
        });
    }
    let mut shared_end = false;
    for l in 0..k.saturating_sub(1) {
        let p = lay.parent[holes[l]];
        if !lay.is_ancestor(p, holes[l + 1]) {
            return Err(Error::invalid(
                "holes are not nested along a single path (not a min-hole expansion)",
            ));
        }
        if p == lay.parent[holes[l + 1]] {
            if l + 2 != k {
                return Err(Error::invalid("only the deepest two holes may share a parent"));
            }
            shared_end = true;
        }
    }
    let mut vertices: Vec<usize> = holes.iter().map(|&h| lay.parent[h]).collect();
    if shared_end {
        vertices[k - 1] = holes[k - 1];
    }
    Ok(MainPath {
        vertex_sizes: vertices.iter().map(|&v| lay.size[v]).collect(),
        hole_sizes: holes.iter().map(|&h| lay.size[h]).collect(),
        vertices,
        holes,
        shared_end,
    })
}

/// A partition NFA with its main path. Words have length `k + 1`.
#[derive(Clone, Debug)]
pub struct PartitionNfa {
    pub nfa: SuccinctNfa<PLabel>,
    pub path: MainPath,
}

impl PartitionNfa {
    /// Word length `k + 1`.
    pub fn word_length(&self) -> usize {
        self.path.len() + 1
    }

    /// Builds the completed tree spelled by a word `& t_1 ⋯ t_k`.
    pub fn decode(&self, t: &PartialTree, word: &[Letter]) -> Result<Tree> {
        if word.len() != self.word_length() || word.first() != Some(&Letter::Amp) {
            return Err(Error::invalid("word does not start with the bootstrap letter"));
        }
        let mut by_pos: Vec<(usize, &Tree)> = Vec::new();
        for (l, &h) in self.path.holes.iter().enumerate() {
            match &word[l + 1] {
                Letter::Tree(x) => by_pos.push((h, &x.tree)),
                Letter::Amp => return Err(Error::invalid("bootstrap letter inside a word")),
            }
        }
        by_pos.sort_by_key(|x| x.0);
        let fillers: Vec<&Tree> = by_pos.into_iter().map(|x| x.1).collect();
        t.fill(&fillers)
    }
}

/// State sets of complete subtrees, indexed by token position.
fn complete_sets(a: &TreeAutomaton, t: &PartialTree, lay: &Layout) -> Vec<Option<StateSet>> {
    let n = t.len();
    let mut sets: Vec<Option<StateSet>> = vec![None; n];
    for i in (0..n).rev() {
        sets[i] = match t.token(i) {
            Token::Hole(_) => None,
            Token::Leaf(s) => Some(a.combine(s, &[])),
            Token::Node(s) => {
                let [l, r] = lay.children[i];
                match (&sets[l], &sets[r]) {
                    (Some(x), Some(y)) => Some(a.combine(s, &[x.clone(), y.clone()])),
                    _ => None,
                }
            }
        };
    }
    sets
}

/// States possible at `target` given `from` at its path-ancestor `node`;
/// every off-path child in between is complete.
fn walk(
    a: &TreeAutomaton,
    t: &PartialTree,
    lay: &Layout,
    sets: &[Option<StateSet>],
    node: usize,
    from: &StateSet,
    target: usize,
) -> StateSet {
    let mut cur = from.clone();
    let mut c = node;
    while c != target {
        let Token::Node(sym) = t.token(c) else {
            return StateSet::with_capacity(a.num_states());
        };
        let [l, r] = lay.children[c];
        let (path_left, off) = if lay.is_ancestor(l, target) { (true, r) } else { (false, l) };
        let off_set = sets[off].as_ref().expect("off-path subtrees are complete");
        let mut next = StateSet::with_capacity(a.num_states());
        for x in cur.ones() {
            for tr in a.transitions_from(x) {
                if tr.symbol != sym || tr.children.len() != 2 {
                    continue;
                }
                let (pc, oc) = if path_left {
                    (tr.children[0], tr.children[1])
                } else {
                    (tr.children[1], tr.children[0])
                };
                if off_set.contains(oc) {
                    next.insert(pc);
                }
            }
        }
        cur = next;
        c = if path_left { l } else { r };
    }
    cur
}

/// Builds the NFA whose `(k+1)`-slice is in bijection with the completions
/// of `t` accepted from `state` at size `i`.
pub fn build_partition_nfa(
    base: &TreeAutomaton,
    t: &PartialTree,
    state: usize,
    i: usize,
) -> Result<PartitionNfa> {
    if !base.is_binary() {
        return Err(Error::invalid("partition NFAs need a binary automaton"));
    }
    if t.full_size() != i {
        return Err(Error::invalid(format!(
            "partial tree has full size {} but level {i} was requested",
            t.full_size()
        )));
    }
    if state >= base.num_states() {
        return Err(Error::invalid("state out of range"));
    }
    let lay = t.layout();
    let path = main_path_with(t, &lay)?;
    let sets = complete_sets(base, t, &lay);
    let ns = base.num_states();
    let k = path.len();
    let mut names = vec!["s0".to_string()];
    for l in 0..k {
        for q in 0..ns {
            names.push(format!("{}^{}@{}", base.states[q], path.vertex_sizes[l], l + 1));
        }
    }
    names.push("se".to_string());
    let se = names.len() - 1;
    let sid = |l: usize, q: usize| 1 + l * ns + q;
    let mut edges: BTreeSet<(usize, PLabel, usize)> = BTreeSet::new();

    if k == 0 {
        if sets[0].as_ref().is_some_and(|s| s.contains(state)) {
            edges.insert((0, PLabel::Amp, se));
        }
    } else {
        let mut start = StateSet::with_capacity(ns);
        start.insert(state);
        let top = walk(base, t, &lay, &sets, 0, &start, path.vertices[0]);
        for q in top.ones() {
            edges.insert((0, PLabel::Amp, sid(0, q)));
        }
        let hole_label = |r: usize, l: usize| PLabel::Trees {
            state: r as u32,
            size: path.hole_sizes[l] as u32,
        };
        for l in 0..k {
            let v = path.vertices[l];
            let last = l + 1 == k;
            if last && (path.shared_end || v == path.holes[l]) {
                // The vertex is the hole itself.
                for q in 0..ns {
                    edges.insert((sid(l, q), hole_label(q, l), se));
                }
                continue;
            }
            let Token::Node(sym) = t.token(v) else {
                return Err(Error::invalid("path vertex is not an internal node"));
            };
            let [lc, rc] = lay.children[v];
            let hole_left = lc == path.holes[l];
            let other = if hole_left { rc } else { lc };
            for q1 in 0..ns {
                for tr in base.transitions_from(q1) {
                    if tr.symbol != sym || tr.children.len() != 2 {
                        continue;
                    }
                    let (r, oc) = if hole_left {
                        (tr.children[0], tr.children[1])
                    } else {
                        (tr.children[1], tr.children[0])
                    };
                    if last {
                        if sets[other].as_ref().is_some_and(|s| s.contains(oc)) {
                            edges.insert((sid(l, q1), hole_label(r, l), se));
                        }
                        continue;
                    }
                    let mut from = StateSet::with_capacity(ns);
                    from.insert(oc);
                    let at = walk(base, t, &lay, &sets, other, &from, path.vertices[l + 1]);
                    for q2 in at.ones() {
                        edges.insert((sid(l, q1), hole_label(r, l), sid(l + 1, q2)));
                    }
                }
            }
        }
    }
    let transitions: Vec<NfaTransition<PLabel>> = edges
        .into_iter()
        .map(|(from, label, to)| NfaTransition { from, label, to })
        .collect();
    let nfa = SuccinctNfa::new(names, 0, se, transitions)?;
    let bound = 3.0 * ((i * base.size()) as f64).powi(4);
    assert!(
        (nfa.size() as f64) <= bound.max(4.0),
        "partition NFA exceeds its size bound"
    );
    Ok(PartitionNfa { nfa, path })
}

/// The unrolled automaton extended with hole leaves `#j` accepted by every
/// state of level `j`.
pub fn extended_automaton(unrolled: &Unrolled) -> Result<TreeAutomaton> {
    let a = unrolled.to_automaton()?;
    let mut b = crate::automaton::Builder::new();
    for s in a.alphabet.symbols() {
        b.symbol(a.alphabet.name(s));
    }
    for s in &a.states {
        b.state(s);
    }
    for t in &a.transitions {
        b.raw_transition(t.from, t.symbol, t.children.clone());
    }
    for j in 1..=unrolled.n {
        let sym = b.symbol(&format!("#{j}"));
        for s in 0..unrolled.num_states() {
            let from = b.state(&format!("{}^{}", unrolled.base.states[s], j));
            b.raw_transition(from, sym, vec![]);
        }
    }
    b.build(2, &a.states[a.initial])
}

/// Whether the extended automaton has a run over `t` from `state` at the
/// size of `t`.
pub fn extended_run_exists(base: &TreeAutomaton, t: &PartialTree, state: usize) -> bool {
    let lay = t.layout();
    let ns = base.num_states();
    let n = t.len();
    let mut sets: Vec<StateSet> = vec![StateSet::with_capacity(ns); n];
    for i in (0..n).rev() {
        sets[i] = match t.token(i) {
            Token::Hole(_) => {
                let mut s = StateSet::with_capacity(ns);
                s.insert_range(..);
                s
            }
            Token::Leaf(a) => base.combine(a, &[]),
            Token::Node(a) => {
                let [l, r] = lay.children[i];
                base.combine(a, &[sets[l].clone(), sets[r].clone()])
            }
        };
    }
    sets[0].contains(state)
}

/// Converts a partial tree to a tree whose holes are leaves `#h` of an
/// extended alphabet.
pub fn with_hole_symbols(t: &PartialTree, base: &Alphabet, ext: &Alphabet) -> Result<Tree> {
    fn go(t: &PartialTree, pos: &mut usize, base: &Alphabet, ext: &Alphabet) -> Result<Tree> {
        let tok = t.token(*pos);
        *pos += 1;
        let map = |s: crate::tree::Symbol| {
            ext.get(base.name(s))
                .ok_or_else(|| Error::invalid("symbol missing from extended alphabet"))
        };
        Ok(match tok {
            Token::Leaf(s) => Tree::leaf(map(s)?),
            Token::Hole(h) => Tree::leaf(
                ext.get(&format!("#{h}"))
                    .ok_or_else(|| Error::invalid("hole size exceeds the unrolling"))?,
            ),
            Token::Node(s) => {
                let l = go(t, pos, base, ext)?;
                let r = go(t, pos, base, ext)?;
                Tree::node(map(s)?, vec![l, r])
            }
        })
    }
    go(t, &mut 0, base, ext)
}

/// Exact label oracle over enumerated tree slices.
pub struct ExactTreeOracle {
    base: TreeAutomaton,
    slices: HashMap<(usize, usize), Vec<Letter>>,
}

impl ExactTreeOracle {
    /// Enumerates `T(r^h)` for every state and every size in `sizes`.
    pub fn new(base: &TreeAutomaton, sizes: &[usize], budget: u64) -> Result<Self> {
        let mut slices = HashMap::new();
        for &h in sizes {
            for r in 0..base.num_states() {
                if slices.contains_key(&(r, h)) {
                    continue;
                }
                let trees = brute_slice(&base.with_initial(r), h, budget)?;
                let v = trees
                    .trees
                    .into_iter()
                    .map(|t| Letter::Tree(Rc::new(SketchTree::new(base, t))))
                    .collect();
                slices.insert((r, h), v);
            }
        }
        Ok(ExactTreeOracle {
            base: base.clone(),
            slices,
        })
    }

    /// Oracle for every hole size of `t`.
    pub fn for_partial(base: &TreeAutomaton, t: &PartialTree, budget: u64) -> Result<Self> {
        let mut sizes: Vec<usize> = t
            .tokens()
            .filter_map(|x| match x {
                Token::Hole(h) => Some(h),
                _ => None,
            })
            .collect();
        sizes.sort_unstable();
        sizes.dedup();
        Self::new(base, &sizes, budget)
    }

    fn slice(&self, label: PLabel) -> &[Letter] {
        match label {
            PLabel::Amp => &[],
            PLabel::Trees { state, size } => self
                .slices
                .get(&(state as usize, size as usize))
                .map(Vec::as_slice)
                .unwrap_or(&[]),
        }
    }
}

impl LabelOracle for ExactTreeOracle {
    type Label = PLabel;
    type Item = Letter;

    fn contains(&self, label: PLabel, item: &Letter) -> bool {
        letter_in(label, item)
    }

    fn approx_size(&self, label: PLabel) -> f64 {
        match label {
            PLabel::Amp => 1.0,
            _ => self.slice(label).len() as f64,
        }
    }

    fn sample(&self, label: PLabel, rng: &mut Rng) -> Option<Letter> {
        match label {
            PLabel::Amp => Some(Letter::Amp),
            _ => {
                let s = self.slice(label);
                (!s.is_empty()).then(|| s[rng.random_range(0..s.len())].clone())
            }
        }
    }

    fn may_overlap(&self, a: PLabel, b: PLabel) -> bool {
        labels_may_overlap(a, b)
    }

    fn enumerate(&self, label: PLabel) -> Option<Vec<Letter>> {
        match label {
            PLabel::Amp => Some(vec![Letter::Amp]),
            _ => Some(self.slice(label).to_vec()),
        }
    }

    fn log2_size_bound(&self, label: PLabel) -> f64 {
        match label {
            PLabel::Amp => 0.0,
            PLabel::Trees { size, .. } => log2_tree_bound(size as usize, self.base.alphabet.len()),
        }
    }

    fn epsilon0(&self) -> f64 {
        0.0
    }
}

/// Exact `|T(s^i, t)|` by trying every filler combination.
pub fn brute_completions(
    base: &TreeAutomaton,
    t: &PartialTree,
    state: usize,
    budget: u64,
) -> Result<BigUint> {
    let holes = t.holes();
    let all: Vec<usize> = (0..base.num_states()).collect();
    let any = base.with_initial_states(&all)?;
    let mut pools: Vec<Vec<Tree>> = Vec::new();
    for &h in &holes {
        let Token::Hole(size) = t.token(h) else { unreachable!() };
        pools.push(brute_slice(&any, size, budget)?.trees);
    }
    let target = base.with_initial(state);
    let mut count = BigUint::zero();
    let mut idx = vec![0usize; holes.len()];
    if pools.iter().any(Vec::is_empty) {
        return Ok(count);
    }
    let mut used = 0u64;
    loop {
        used += 1;
        if used > budget {
            return Err(Error::Budget(format!("completion enumeration exceeds {budget} trees")));
        }
        let fillers: Vec<&Tree> = (0..holes.len()).map(|x| &pools[x][idx[x]]).collect();
        let tree = t.fill(&fillers)?;
        if target.accepts(&tree)? {
            count += 1u32;
        }
        let mut p = holes.len();
        loop {
            if p == 0 {
                return Ok(count);
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < pools[p].len() {
                break;
            }
            idx[p] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::nfa::brute::brute_nfa_count;

    fn exact(base: &TreeAutomaton, text: &str, s: usize) -> (BigUint, BigUint) {
        let t = PartialTree::parse(text, &base.alphabet).unwrap();
        let i = t.full_size();
        let p = build_partition_nfa(base, &t, s, i).unwrap();
        let o = ExactTreeOracle::for_partial(base, &t, 1_000_000).unwrap();
        let lhs = brute_nfa_count(&p.nfa, p.word_length(), &o, 10_000_000).unwrap();
        let rhs = brute_completions(base, &t, s, 10_000_000).unwrap();
        (lhs, rhs)
    }

    #[test]
    fn main_path_cases() {
        let a = fixtures::double_branch();
        let t = PartialTree::parse("#7", &a.alphabet).unwrap();
        let p = main_path(&t).unwrap();
        assert_eq!(p.vertices, vec![0]);
        let t = PartialTree::parse("a(a(#1,#1),#5)", &a.alphabet).unwrap();
        let p = main_path(&t).unwrap();
        assert!(p.shared_end);
        assert_eq!(p.hole_sizes, vec![5, 1, 1]);
        assert_eq!(p.vertex_sizes, vec![9, 3, 1]);
        let bad = PartialTree::parse("a(a(#1,a),a(#1,a))", &a.alphabet).unwrap();
        assert!(main_path(&bad).is_err());
    }

    #[test]
    fn reduction_is_exact_on_small_trees() {
        let a = fixtures::double_branch();
        let s = a.state_index("s").unwrap();
        for text in [
            "#7",
            "a(#1,#5)",
            "a(#3,#3)",
            "a(a(#1,#1),#5)",
            "a(#5,a(a,a))",
            "a(a(a,a),a(#1,#3))",
            "a(a,a(a,a(#1,#1)))",
            "a(a(a(a,a),a(a,a)),a(a,a(a,a)))",
        ] {
            let (l, r) = exact(&a, text, s);
            assert_eq!(l, r, "{text}");
        }
    }

    #[test]
    fn extended_run_matches_completion_nonemptiness() {
        let a = fixtures::some_b_leaf();
        let s = a.state_index("s").unwrap();
        for text in ["#5", "a(#1,#3)", "a(a,#3)", "a(a,a(a,#1))", "a(a,a(a,a))"] {
            let t = PartialTree::parse(text, &a.alphabet).unwrap();
            let n = brute_completions(&a, &t, s, 1_000_000).unwrap();
            if n > BigUint::zero() {
                assert!(extended_run_exists(&a, &t, s), "{text}");
            }
        }
        let u = Unrolled::new(&a, 5).unwrap();
        let ext = extended_automaton(&u).unwrap();
        let t = PartialTree::parse("a(#1,#3)", &a.alphabet).unwrap();
        let tt = with_hole_symbols(&t, &a.alphabet, &ext.alphabet).unwrap();
        assert!(ext.accepts(&tt).unwrap());
    }
}
