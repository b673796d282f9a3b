//! Planning: variable interaction graph, variable orders, tree
//! decompositions, and construction of graded project-join trees.
//!
//! A graded project-join tree assigns every clause to a leaf and every
//! used variable to exactly one internal node, with all output-labeled
//! nodes below all input-labeled nodes. The solver quantifies a variable
//! away at the node labeling it, so tree shape decides intermediate BDD
//! sizes; everything here is deterministic so runs are reproducible.

use crate::cnf::{SynthesisProblem, VarId};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

/// Primal graph: one vertex per problem variable (used or not), an edge
/// between two variables iff some clause contains both.
#[derive(Clone, Debug)]
pub struct GaifmanGraph {
    vertices: Vec<VarId>,
    adjacency: BTreeMap<VarId, BTreeSet<VarId>>,
}

impl GaifmanGraph {
    /// Ascending by variable id.
    pub fn vertices(&self) -> &[VarId] {
        &self.vertices
    }

    pub fn neighbors(&self, v: VarId) -> Option<&BTreeSet<VarId>> {
        self.adjacency.get(&v)
    }

    pub fn has_edge(&self, u: VarId, v: VarId) -> bool {
        self.adjacency.get(&u).is_some_and(|ns| ns.contains(&v))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(|ns| ns.len()).sum::<usize>() / 2
    }
}

pub fn build_gaifman(p: &SynthesisProblem) -> GaifmanGraph {
    let mut vertices: Vec<VarId> = p.inputs().iter().chain(p.outputs()).copied().collect();
    vertices.sort();
    let mut adjacency: BTreeMap<VarId, BTreeSet<VarId>> =
        vertices.iter().map(|&v| (v, BTreeSet::new())).collect();
    for clause in p.clauses() {
        let vars: Vec<VarId> = clause.variables().collect();
        for (i, &u) in vars.iter().enumerate() {
            for &v in &vars[i + 1..] {
                adjacency.get_mut(&u).unwrap().insert(v);
                adjacency.get_mut(&v).unwrap().insert(u);
            }
        }
    }
    GaifmanGraph { vertices, adjacency }
}

/// Maximum-cardinality search: repeatedly pick the unvisited vertex with
/// the most visited neighbors, breaking ties toward the smallest id, so
/// the first pick is the smallest vertex.
pub fn mcs_order(g: &GaifmanGraph) -> Vec<VarId> {
    let mut weight: BTreeMap<VarId, usize> = g.vertices.iter().map(|&v| (v, 0)).collect();
    let mut order = Vec::with_capacity(g.vertices.len());
    while !weight.is_empty() {
        // BTreeMap iterates ascending, so `>` keeps the smallest maximum.
        let best = weight
            .iter()
            .fold(None, |acc: Option<(VarId, usize)>, (&v, &w)| match acc {
                Some((_, bw)) if w <= bw => acc,
                _ => Some((v, w)),
            })
            .map(|(v, _)| v)
            .unwrap();
        weight.remove(&best);
        order.push(best);
        for &n in &g.adjacency[&best] {
            if let Some(w) = weight.get_mut(&n) {
                *w += 1;
            }
        }
    }
    order
}

/// Tree decomposition: bags of variables arranged in a tree such that
/// every clause fits inside some bag and the bags holding any given
/// variable form a connected subtree.
#[derive(Clone, Debug)]
pub struct TreeDecomposition {
    bags: Vec<BTreeSet<VarId>>,
    edges: Vec<(usize, usize)>,
    width: usize,
}

impl TreeDecomposition {
    /// `edges` connect bag indices; width is the largest bag size minus
    /// one, floored at zero for the degenerate empty-bag decomposition.
    pub fn new(bags: Vec<BTreeSet<VarId>>, edges: Vec<(usize, usize)>) -> Self {
        let width = bags.iter().map(|b| b.len()).max().unwrap_or(0).saturating_sub(1);
        TreeDecomposition { bags, edges, width }
    }

    pub fn bags(&self) -> &[BTreeSet<VarId>] {
        &self.bags
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

/// Greedy elimination choosing, at each step, the vertex whose
/// elimination adds the fewest fill edges (ties toward the smallest id).
/// Bags are the elimination cliques; bags contained in a tree-adjacent
/// bag are absorbed into it.
pub fn min_fill_decomposition(g: &GaifmanGraph) -> TreeDecomposition {
    let mut adj = g.adjacency.clone();
    let mut cliques: Vec<(VarId, BTreeSet<VarId>)> = Vec::new();
    while !adj.is_empty() {
        let mut best: Option<(usize, VarId)> = None;
        for (&v, ns) in &adj {
            let ns: Vec<VarId> = ns.iter().copied().collect();
            let mut fill = 0usize;
            for (i, &a) in ns.iter().enumerate() {
                for &b in &ns[i + 1..] {
                    if !adj[&a].contains(&b) {
                        fill += 1;
                    }
                }
            }
            match best {
                Some((bf, _)) if bf <= fill => {}
                _ => best = Some((fill, v)),
            }
        }
        let (_, v) = best.unwrap();
        let ns: Vec<VarId> = adj[&v].iter().copied().collect();
        let mut bag: BTreeSet<VarId> = ns.iter().copied().collect();
        bag.insert(v);
        cliques.push((v, bag));
        for (i, &a) in ns.iter().enumerate() {
            for &b in &ns[i + 1..] {
                adj.get_mut(&a).unwrap().insert(b);
                adj.get_mut(&b).unwrap().insert(a);
            }
        }
        adj.remove(&v);
        for others in adj.values_mut() {
            others.remove(&v);
        }
    }
    if cliques.is_empty() {
        // Degenerate decomposition so empty-variable problems (for
        // instance a lone empty clause) still fit somewhere.
        return TreeDecomposition::new(vec![BTreeSet::new()], vec![]);
    }

    // Clique of v connects to the clique of its earliest-eliminated
    // remaining neighbor; parentless cliques (one per component) chain to
    // the final one so the bags form a single tree.
    let position: BTreeMap<VarId, usize> =
        cliques.iter().enumerate().map(|(i, (v, _))| (*v, i)).collect();
    let n = cliques.len();
    let mut neighbors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut parentless: Vec<usize> = Vec::new();
    for (i, (v, bag)) in cliques.iter().enumerate() {
        let parent = bag.iter().filter(|u| *u != v).map(|u| position[u]).min();
        match parent {
            Some(p) => {
                neighbors[i].insert(p);
                neighbors[p].insert(i);
            }
            None => parentless.push(i),
        }
    }
    let last = *parentless.last().unwrap();
    for &i in &parentless {
        if i != last {
            neighbors[i].insert(last);
            neighbors[last].insert(i);
        }
    }

    // Absorb subset bags into a tree-adjacent superset until stable.
    let mut alive: Vec<bool> = vec![true; n];
    let mut bags: Vec<BTreeSet<VarId>> = cliques.into_iter().map(|(_, b)| b).collect();
    loop {
        let mut merged = false;
        'scan: for i in 0..n {
            if !alive[i] {
                continue;
            }
            let into =
                neighbors[i].iter().copied().find(|&j| alive[j] && bags[i].is_subset(&bags[j]));
            if let Some(j) = into {
                alive[i] = false;
                let moved: Vec<usize> = neighbors[i].iter().copied().filter(|&k| k != j).collect();
                for k in moved {
                    neighbors[k].remove(&i);
                    neighbors[k].insert(j);
                    neighbors[j].insert(k);
                }
                neighbors[j].remove(&i);
                merged = true;
                break 'scan;
            }
        }
        if !merged {
            break;
        }
    }

    let mut renumber: BTreeMap<usize, usize> = BTreeMap::new();
    let mut final_bags = Vec::new();
    for i in 0..n {
        if alive[i] {
            renumber.insert(i, final_bags.len());
            final_bags.push(std::mem::take(&mut bags[i]));
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        if !alive[i] {
            continue;
        }
        for &j in &neighbors[i] {
            if alive[j] && i < j {
                edges.push((renumber[&i], renumber[&j]));
            }
        }
    }
    TreeDecomposition::new(final_bags, edges)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Grade {
    X,
    Y,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TreeNode {
    Leaf { clause: usize },
    Internal { label: BTreeSet<VarId>, children: Vec<usize>, grade: Grade },
}

/// Project-join tree whose leaves are clauses and whose internal nodes
/// carry the variables quantified there. Leaf node ids coincide with
/// clause indices; internal nodes follow in construction order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GradedProjectJoinTree {
    nodes: Vec<TreeNode>,
    root: usize,
}

impl GradedProjectJoinTree {
    /// No validation happens here; [`validate_tree`] is the checker, and
    /// tests construct deliberately broken trees through this.
    pub fn from_parts(nodes: Vec<TreeNode>, root: usize) -> Self {
        GradedProjectJoinTree { nodes, root }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        matches!(self.nodes[id], TreeNode::Leaf { .. })
    }

    pub fn clause_of(&self, id: usize) -> Option<usize> {
        match self.nodes[id] {
            TreeNode::Leaf { clause } => Some(clause),
            TreeNode::Internal { .. } => None,
        }
    }

    pub fn label(&self, id: usize) -> Option<&BTreeSet<VarId>> {
        match &self.nodes[id] {
            TreeNode::Leaf { .. } => None,
            TreeNode::Internal { label, .. } => Some(label),
        }
    }

    pub fn children(&self, id: usize) -> &[usize] {
        match &self.nodes[id] {
            TreeNode::Leaf { .. } => &[],
            TreeNode::Internal { children, .. } => children,
        }
    }

    pub fn grade(&self, id: usize) -> Option<Grade> {
        match &self.nodes[id] {
            TreeNode::Leaf { .. } => None,
            TreeNode::Internal { grade, .. } => Some(*grade),
        }
    }

    /// Children before parents; children in their listed order.
    pub fn postorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                out.push(id);
            } else {
                stack.push((id, true));
                for &c in self.children(id).iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    /// Parent of each node reachable from the root; the root maps to None.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.nodes.len()];
        for id in 0..self.nodes.len() {
            for &c in self.children(id) {
                parent[c] = Some(id);
            }
        }
        parent[self.root] = None;
        parent
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid tree decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("order violation: {0}")]
    OrderViolation(String),
}

fn used_vars(p: &SynthesisProblem) -> BTreeSet<VarId> {
    p.clauses().iter().flat_map(|c| c.variables()).collect()
}

/// Core bucket construction shared by both planners. `order` must list
/// used output variables first, then used input variables; each variable
/// joins every pending subtree still mentioning it under a node labeled
/// with that variable. A single gathered subtree of the same grade
/// absorbs the variable into its label instead of growing a chain.
fn build_by_elimination(p: &SynthesisProblem, order: &[VarId]) -> GradedProjectJoinTree {
    let mut nodes: Vec<TreeNode> =
        (0..p.clauses().len()).map(|clause| TreeNode::Leaf { clause }).collect();
    // Pending roots with the variables still free in their subtree.
    let mut pending: Vec<(usize, BTreeSet<VarId>)> =
        p.clauses().iter().enumerate().map(|(i, c)| (i, c.variables().collect())).collect();

    for &v in order {
        let grade = if p.is_output(v) { Grade::Y } else { Grade::X };
        let gathered: Vec<usize> =
            (0..pending.len()).filter(|&i| pending[i].1.contains(&v)).collect();
        debug_assert!(!gathered.is_empty(), "used variable gathers nothing");
        if let [single] = gathered[..] {
            let (id, free) = &mut pending[single];
            if let TreeNode::Internal { label, grade: g, .. } = &mut nodes[*id] {
                if *g == grade {
                    label.insert(v);
                    free.remove(&v);
                    continue;
                }
            }
        }
        let mut free = BTreeSet::new();
        let mut children = Vec::with_capacity(gathered.len());
        for &i in &gathered {
            children.push(pending[i].0);
            free.extend(pending[i].1.iter().copied());
        }
        free.remove(&v);
        let id = nodes.len();
        nodes.push(TreeNode::Internal { label: BTreeSet::from([v]), children, grade });
        for &i in gathered.iter().rev() {
            pending.remove(i);
        }
        pending.push((id, free));
    }

    // Input variables occurring in no clause still need a labeling node;
    // they go to the root. Unused outputs stay out of the tree entirely.
    let unused_x: BTreeSet<VarId> = {
        let used = used_vars(p);
        p.inputs().iter().copied().filter(|v| !used.contains(v)).collect()
    };
    let root = if let [(single, _)] = pending[..] {
        match &mut nodes[single] {
            TreeNode::Internal { label, grade: Grade::X, .. } if !unused_x.is_empty() => {
                label.extend(unused_x);
                single
            }
            TreeNode::Internal { .. } if unused_x.is_empty() => single,
            _ => {
                let id = nodes.len();
                nodes.push(TreeNode::Internal {
                    label: unused_x,
                    children: vec![single],
                    grade: Grade::X,
                });
                id
            }
        }
    } else {
        let children: Vec<usize> = pending.iter().map(|&(id, _)| id).collect();
        let id = nodes.len();
        nodes.push(TreeNode::Internal { label: unused_x, children, grade: Grade::X });
        id
    };
    GradedProjectJoinTree::from_parts(nodes, root)
}

/// Builds a graded tree directly from a variable order. Unknown or
/// duplicated entries, a missing used variable, or an input appearing
/// before any output are rejected; unused entries are skipped since the
/// root-label and constant-witness rules already cover them.
pub fn bucket_elimination_tree(
    p: &SynthesisProblem,
    order: &[VarId],
) -> Result<GradedProjectJoinTree, PlanError> {
    let mut seen = BTreeSet::new();
    for &v in order {
        if !p.is_input(v) && !p.is_output(v) {
            return Err(PlanError::OrderViolation(format!("unknown variable {}", v)));
        }
        if !seen.insert(v) {
            return Err(PlanError::OrderViolation(format!("variable {} listed twice", v)));
        }
    }
    let used = used_vars(p);
    for &v in &used {
        if !seen.contains(&v) {
            return Err(PlanError::OrderViolation(format!("used variable {} missing", v)));
        }
    }
    let used_seq: Vec<VarId> = order.iter().copied().filter(|v| used.contains(v)).collect();
    let first_x = used_seq.iter().position(|&v| p.is_input(v));
    if let Some(i) = first_x {
        if let Some(y) = used_seq[i..].iter().find(|&&v| p.is_output(v)) {
            return Err(PlanError::OrderViolation(format!(
                "output {} ordered after input {}",
                y, used_seq[i]
            )));
        }
    }
    Ok(build_by_elimination(p, &used_seq))
}

/// Derives an elimination order from the decomposition (each variable at
/// its topmost bag, bags in post-order from bag 0, ascending ids within a
/// bag), splits it outputs-first, and runs the bucket construction.
pub fn decomposition_to_graded_tree(
    p: &SynthesisProblem,
    td: &TreeDecomposition,
) -> Result<GradedProjectJoinTree, PlanError> {
    for (i, clause) in p.clauses().iter().enumerate() {
        let vars: BTreeSet<VarId> = clause.variables().collect();
        if !td.bags().iter().any(|bag| vars.is_subset(bag)) {
            return Err(PlanError::InvalidDecomposition(format!("clause {} fits in no bag", i)));
        }
    }

    let n = td.bags().len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(a, b) in td.edges() {
        if a >= n || b >= n {
            return Err(PlanError::InvalidDecomposition(format!(
                "edge ({}, {}) out of range",
                a, b
            )));
        }
        adj[a].insert(b);
        adj[b].insert(a);
    }

    // Root at bag 0; anything unreachable from it cannot influence the
    // order, which only matters for invalid inputs.
    let mut depth = vec![usize::MAX; n];
    let mut parent = vec![None; n];
    if n > 0 {
        depth[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(b) = queue.pop_front() {
            for &c in &adj[b] {
                if depth[c] == usize::MAX {
                    depth[c] = depth[b] + 1;
                    parent[c] = Some(b);
                    queue.push_back(c);
                }
            }
        }
    }

    let mut post_index = vec![usize::MAX; n];
    {
        let mut counter = 0;
        let mut stack = vec![(0usize, false)];
        while let Some((b, expanded)) = stack.pop() {
            if expanded {
                post_index[b] = counter;
                counter += 1;
            } else {
                stack.push((b, true));
                for &c in adj[b].iter().rev() {
                    if parent[c] == Some(b) {
                        stack.push((c, false));
                    }
                }
            }
        }
    }

    let used = used_vars(p);
    let mut keyed: Vec<(usize, VarId)> = Vec::new();
    for &v in &used {
        let top = (0..n)
            .filter(|&b| td.bags()[b].contains(&v) && depth[b] != usize::MAX)
            .min_by_key(|&b| (depth[b], b));
        let top = top.ok_or_else(|| {
            PlanError::InvalidDecomposition(format!("variable {} appears in no bag", v))
        })?;
        keyed.push((post_index[top], v));
    }
    keyed.sort();
    let outputs_first: Vec<VarId> = keyed
        .iter()
        .filter(|&&(_, v)| p.is_output(v))
        .chain(keyed.iter().filter(|&&(_, v)| p.is_input(v)))
        .map(|&(_, v)| v)
        .collect();
    Ok(build_by_elimination(p, &outputs_first))
}

/// One defect in a graded project-join tree. Validation reports all
/// defects it can see rather than stopping at the first.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TreeViolation {
    /// Node structure is not a tree rooted at `root` (bad child ids,
    /// multiple parents, unreachable nodes, or a cycle).
    NotATree(String),
    ClauseWithoutLeaf(usize),
    DuplicateLeaf(usize),
    LeafOutOfRange {
        node: usize,
        clause: usize,
    },
    /// Variable labeled by more than one internal node.
    DuplicateLabel(VarId),
    /// Input or used output missing from every label.
    MissingLabel(VarId),
    /// Labeled variable outside inputs and used outputs.
    ForeignLabel(VarId),
    /// A clause containing `var` whose leaf is not in the subtree of the
    /// node labeling `var`.
    ClauseOutsideScope {
        var: VarId,
        clause: usize,
    },
    /// Label variable whose side contradicts the node's grade.
    GradeMismatch {
        node: usize,
        var: VarId,
    },
    /// Input-graded node below an output-graded node.
    XBelowY {
        node: usize,
    },
}

impl std::fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TreeViolation::NotATree(why) => write!(f, "not a tree: {}", why),
            TreeViolation::ClauseWithoutLeaf(c) => write!(f, "clause {} has no leaf", c),
            TreeViolation::DuplicateLeaf(c) => write!(f, "clause {} has multiple leaves", c),
            TreeViolation::LeafOutOfRange { node, clause } => {
                write!(f, "leaf {} names nonexistent clause {}", node, clause)
            }
            TreeViolation::DuplicateLabel(v) => write!(f, "variable {} labeled twice", v),
            TreeViolation::MissingLabel(v) => write!(f, "variable {} labeled nowhere", v),
            TreeViolation::ForeignLabel(v) => {
                write!(f, "variable {} must not appear in any label", v)
            }
            TreeViolation::ClauseOutsideScope { var, clause } => {
                write!(f, "clause {} lies outside the node labeling {}", clause, var)
            }
            TreeViolation::GradeMismatch { node, var } => {
                write!(f, "node {} labels {} against its grade", node, var)
            }
            TreeViolation::XBelowY { node } => {
                write!(f, "input-graded node {} below an output-graded node", node)
            }
        }
    }
}

/// Checks every defining condition: rooted tree shape, leaf/clause
/// bijection, labels partitioning inputs plus used outputs, every clause
/// below each of its variables' labeling nodes, grade consistency, and
/// no input-graded node below an output-graded one.
pub fn validate_tree(p: &SynthesisProblem, t: &GradedProjectJoinTree) -> Vec<TreeViolation> {
    let n = t.len();
    let mut violations = Vec::new();

    if t.root() >= n {
        return vec![TreeViolation::NotATree(format!("root id {} out of range", t.root()))];
    }
    let mut indegree = vec![0usize; n];
    for id in 0..n {
        for &c in t.children(id) {
            if c >= n {
                return vec![TreeViolation::NotATree(format!(
                    "node {} has out-of-range child {}",
                    id, c
                ))];
            }
            indegree[c] += 1;
        }
    }
    if indegree[t.root()] != 0 {
        violations.push(TreeViolation::NotATree("root has a parent".into()));
    }
    let mut reachable = vec![false; n];
    let mut stack = vec![t.root()];
    while let Some(id) = stack.pop() {
        if reachable[id] {
            violations.push(TreeViolation::NotATree(format!("node {} revisited", id)));
            break;
        }
        reachable[id] = true;
        stack.extend(t.children(id).iter().copied());
    }
    for (id, &r) in reachable.iter().enumerate() {
        if !r {
            violations.push(TreeViolation::NotATree(format!("node {} unreachable", id)));
        }
        if id != t.root() && indegree[id] > 1 {
            violations.push(TreeViolation::NotATree(format!("node {} has multiple parents", id)));
        }
    }
    if !violations.is_empty() {
        // Semantic checks assume tree shape; stop here.
        return violations;
    }

    let m = p.clauses().len();
    let mut leaf_count = vec![0usize; m];
    for id in 0..n {
        if let Some(c) = t.clause_of(id) {
            if c >= m {
                violations.push(TreeViolation::LeafOutOfRange { node: id, clause: c });
            } else {
                leaf_count[c] += 1;
            }
        }
    }
    for (c, &k) in leaf_count.iter().enumerate() {
        if k == 0 {
            violations.push(TreeViolation::ClauseWithoutLeaf(c));
        } else if k > 1 {
            violations.push(TreeViolation::DuplicateLeaf(c));
        }
    }

    let used = used_vars(p);
    let mut expected: BTreeSet<VarId> = p.inputs().iter().copied().collect();
    expected.extend(p.outputs().iter().filter(|v| used.contains(v)));
    let mut labeler: BTreeMap<VarId, usize> = BTreeMap::new();
    let mut duplicated: BTreeSet<VarId> = BTreeSet::new();
    for id in 0..n {
        if let Some(label) = t.label(id) {
            for &v in label {
                if labeler.insert(v, id).is_some() {
                    duplicated.insert(v);
                }
            }
        }
    }
    for &v in &duplicated {
        violations.push(TreeViolation::DuplicateLabel(v));
    }
    for &v in &expected {
        if !labeler.contains_key(&v) {
            violations.push(TreeViolation::MissingLabel(v));
        }
    }
    for &v in labeler.keys() {
        if !expected.contains(&v) {
            violations.push(TreeViolation::ForeignLabel(v));
        }
    }

    // Clause sets per subtree, then the containment condition: the leaf
    // of every clause mentioning v sits below the node labeling v.
    let mut clause_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for id in t.postorder() {
        match t.clause_of(id) {
            Some(c) => {
                clause_sets[id].insert(c);
            }
            None => {
                let mut set = BTreeSet::new();
                for &c in t.children(id) {
                    set.extend(clause_sets[c].iter().copied());
                }
                clause_sets[id] = set;
            }
        }
    }
    for (&v, &node) in &labeler {
        if duplicated.contains(&v) {
            continue;
        }
        for (c, clause) in p.clauses().iter().enumerate() {
            if clause.variables().any(|u| u == v) && !clause_sets[node].contains(&c) {
                violations.push(TreeViolation::ClauseOutsideScope { var: v, clause: c });
            }
        }
    }

    for id in 0..n {
        if let (Some(label), Some(grade)) = (t.label(id), t.grade(id)) {
            for &v in label {
                let wrong = match grade {
                    Grade::X => p.is_output(v),
                    Grade::Y => p.is_input(v),
                };
                if wrong {
                    violations.push(TreeViolation::GradeMismatch { node: id, var: v });
                }
            }
        }
    }

    let mut stack = vec![(t.root(), false)];
    while let Some((id, below_y)) = stack.pop() {
        let below = match t.grade(id) {
            Some(Grade::X) => {
                if below_y {
                    violations.push(TreeViolation::XBelowY { node: id });
                }
                below_y
            }
            Some(Grade::Y) => true,
            None => below_y,
        };
        for &c in t.children(id) {
            stack.push((c, below));
        }
    }

    violations
}

/// Width of a graded tree: the largest number of variables simultaneously
/// live at any internal node, counting the node's own label and every
/// variable of its subtree not yet quantified below it.
pub fn tree_width(p: &SynthesisProblem, t: &GradedProjectJoinTree) -> usize {
    let mut free: Vec<BTreeSet<VarId>> = vec![BTreeSet::new(); t.len()];
    let mut width = 0;
    for id in t.postorder() {
        match t.clause_of(id) {
            Some(c) => free[id] = p.clauses()[c].variables().collect(),
            None => {
                let mut live = BTreeSet::new();
                for &child in t.children(id) {
                    match t.label(child) {
                        None => live.extend(free[child].iter().copied()),
                        Some(lbl) => live.extend(free[child].iter().filter(|v| !lbl.contains(v))),
                    }
                }
                let label = t.label(id).unwrap();
                width = width.max(live.union(label).count());
                free[id] = live;
            }
        }
    }
    width
}

/// Graphviz rendering: leaves show their clause in DIMACS literals,
/// internal nodes show `e: v1,v2`; input-graded nodes are boxes,
/// output-graded nodes ellipses.
pub fn tree_to_dot(p: &SynthesisProblem, t: &GradedProjectJoinTree) -> String {
    use std::fmt::Write;

    let mut s = String::from("digraph project_join_tree {\n");
    for id in 0..t.len() {
        match &t.nodes()[id] {
            TreeNode::Leaf { clause } => {
                let text: Vec<String> = p.clauses()[*clause]
                    .literals()
                    .iter()
                    .map(|l| l.to_dimacs().to_string())
                    .collect();
                writeln!(
                    s,
                    "  n{} [shape=plaintext, label=\"{}\"];",
                    id,
                    if text.is_empty() { "empty".into() } else { text.join(" ") }
                )
                .unwrap();
            }
            TreeNode::Internal { label, grade, .. } => {
                let vars: Vec<String> = label.iter().map(|v| v.to_string()).collect();
                let shape = match grade {
                    Grade::X => "box",
                    Grade::Y => "ellipse",
                };
                writeln!(s, "  n{} [shape={}, label=\"e: {}\"];", id, shape, vars.join(","))
                    .unwrap();
            }
        }
    }
    for id in 0..t.len() {
        for &c in t.children(id) {
            writeln!(s, "  n{} -> n{};", id, c).unwrap();
        }
    }
    s.push_str("}\n");
    s
}

/// JSON mirror of the node list and root id.
pub fn tree_to_json(t: &GradedProjectJoinTree) -> serde_json::Value {
    let nodes: Vec<serde_json::Value> = t
        .nodes()
        .iter()
        .map(|node| match node {
            TreeNode::Leaf { clause } => serde_json::json!({ "leaf": { "clause": clause } }),
            TreeNode::Internal { label, children, grade } => serde_json::json!({
                "internal": {
                    "label": label.iter().map(|v| v.get()).collect::<Vec<_>>(),
                    "children": children,
                    "grade": match grade { Grade::X => "x", Grade::Y => "y" },
                }
            }),
        })
        .collect();
    serde_json::json!({ "root": t.root(), "nodes": nodes })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::cnf::{parse_qdimacs, tests::RUNNING_EXAMPLE};

    fn v(id: u32) -> VarId {
        VarId::new(id)
    }

    fn vs(ids: &[u32]) -> BTreeSet<VarId> {
        ids.iter().map(|&i| VarId::new(i)).collect()
    }

    /// The example tree from the module docs, ids shifted down by one:
    /// leaves 0..4 are the five clauses, node 5 labels {y4} over leaves
    /// 0 and 3, node 6 labels {y5} over leaves 4, 1 and node 5, node 7
    /// labels {x3} over node 6, node 8 labels {y6} over leaf 2, and the
    /// root 9 labels {x1,x2} over nodes 7 and 8.
    pub(crate) fn figure_tree() -> GradedProjectJoinTree {
        let nodes = vec![
            TreeNode::Leaf { clause: 0 },
            TreeNode::Leaf { clause: 1 },
            TreeNode::Leaf { clause: 2 },
            TreeNode::Leaf { clause: 3 },
            TreeNode::Leaf { clause: 4 },
            TreeNode::Internal { label: vs(&[4]), children: vec![0, 3], grade: Grade::Y },
            TreeNode::Internal { label: vs(&[5]), children: vec![4, 1, 5], grade: Grade::Y },
            TreeNode::Internal { label: vs(&[3]), children: vec![6], grade: Grade::X },
            TreeNode::Internal { label: vs(&[6]), children: vec![2], grade: Grade::Y },
            TreeNode::Internal { label: vs(&[1, 2]), children: vec![7, 8], grade: Grade::X },
        ];
        GradedProjectJoinTree::from_parts(nodes, 9)
    }

    pub(crate) fn running_example() -> SynthesisProblem {
        parse_qdimacs(RUNNING_EXAMPLE).unwrap()
    }

    #[test]
    fn gaifman_edges_from_clauses() {
        let p = running_example();
        let g = build_gaifman(&p);
        assert_eq!(g.vertices(), &[v(1), v(2), v(3), v(4), v(5), v(6)]);
        assert!(g.has_edge(v(1), v(4)));
        assert!(g.has_edge(v(4), v(5)));
        assert!(!g.has_edge(v(4), v(6)));
        assert!(!g.has_edge(v(1), v(1)));

        let single = parse_qdimacs("p cnf 1 1\na 1 0\n1 0\n").unwrap();
        let g = build_gaifman(&single);
        assert_eq!(g.vertices().len(), 1);
        assert_eq!(g.edge_count(), 0);

        let chain = parse_qdimacs("p cnf 3 2\na 1 2 3 0\n1 2 0\n2 3 0\n").unwrap();
        let g = build_gaifman(&chain);
        assert!(g.has_edge(v(1), v(2)) && g.has_edge(v(2), v(3)));
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn mcs_tie_breaks_and_golden_order() {
        let empty = parse_qdimacs("p cnf 3 0\na 1 2 3 0\n").unwrap();
        assert_eq!(mcs_order(&build_gaifman(&empty)), vec![v(1), v(2), v(3)]);

        let path = parse_qdimacs("p cnf 3 2\na 1 2 3 0\n1 2 0\n2 3 0\n").unwrap();
        assert_eq!(mcs_order(&build_gaifman(&path)), vec![v(1), v(2), v(3)]);

        let g = build_gaifman(&running_example());
        assert_eq!(mcs_order(&g), vec![v(1), v(2), v(3), v(5), v(4), v(6)]);
    }

    #[test]
    fn min_fill_goldens() {
        let triangle = parse_qdimacs("p cnf 3 3\na 1 2 3 0\n1 2 0\n2 3 0\n1 3 0\n").unwrap();
        let td = min_fill_decomposition(&build_gaifman(&triangle));
        assert_eq!(td.bags(), &[vs(&[1, 2, 3])]);
        assert_eq!(td.width(), 2);

        let path = parse_qdimacs("p cnf 3 2\na 1 2 3 0\n1 2 0\n2 3 0\n").unwrap();
        let td = min_fill_decomposition(&build_gaifman(&path));
        assert_eq!(td.bags(), &[vs(&[1, 2]), vs(&[2, 3])]);
        assert_eq!(td.edges(), &[(0, 1)]);
        assert_eq!(td.width(), 1);
    }

    #[test]
    fn min_fill_running_example_is_small_and_valid() {
        let p = running_example();
        let td = min_fill_decomposition(&build_gaifman(&p));
        assert!(td.width() <= 4, "width {} too large", td.width());
        for clause in p.clauses() {
            let vars: BTreeSet<VarId> = clause.variables().collect();
            assert!(td.bags().iter().any(|b| vars.is_subset(b)));
        }
        assert_eq!(td.edges().len() + 1, td.bags().len());
    }

    #[test]
    fn figure_tree_is_valid() {
        let p = running_example();
        assert_eq!(validate_tree(&p, &figure_tree()), vec![]);
    }

    #[test]
    fn relabeled_node_breaks_grade_and_partition() {
        let p = running_example();
        let t = figure_tree();
        let mut nodes = t.nodes().to_vec();
        nodes[7] = TreeNode::Internal { label: vs(&[4]), children: vec![6], grade: Grade::X };
        let bad = GradedProjectJoinTree::from_parts(nodes, 9);
        let violations = validate_tree(&p, &bad);
        assert!(violations.contains(&TreeViolation::DuplicateLabel(v(4))));
        assert!(violations.contains(&TreeViolation::MissingLabel(v(3))));
        assert!(violations.iter().any(
            |viol| matches!(viol, TreeViolation::GradeMismatch { node: 7, var } if *var == v(4))
        ));
    }

    #[test]
    fn detached_leaf_breaks_clause_containment() {
        let p = running_example();
        let t = figure_tree();
        let mut nodes = t.nodes().to_vec();
        // Clause 3 contains y4 but its leaf moves out of node 5's subtree.
        nodes[5] = TreeNode::Internal { label: vs(&[4]), children: vec![0], grade: Grade::Y };
        nodes[6] =
            TreeNode::Internal { label: vs(&[5]), children: vec![4, 1, 5, 3], grade: Grade::Y };
        let bad = GradedProjectJoinTree::from_parts(nodes, 9);
        let violations = validate_tree(&p, &bad);
        assert_eq!(violations, vec![TreeViolation::ClauseOutsideScope { var: v(4), clause: 3 }]);
    }

    #[test]
    fn figure_tree_width_is_four() {
        let p = running_example();
        assert_eq!(tree_width(&p, &figure_tree()), 4);
    }

    #[test]
    fn width_degenerate_cases() {
        let p = parse_qdimacs("p cnf 3 1\na 1 2 3 0\n1 2 3 0\n").unwrap();
        let t = GradedProjectJoinTree::from_parts(
            vec![
                TreeNode::Leaf { clause: 0 },
                TreeNode::Internal { label: vs(&[1, 2, 3]), children: vec![0], grade: Grade::X },
            ],
            1,
        );
        assert_eq!(validate_tree(&p, &t), vec![]);
        assert_eq!(tree_width(&p, &t), 3);

        let p = parse_qdimacs("p cnf 2 2\na 1 2 0\n1 0\n2 0\n").unwrap();
        let t = GradedProjectJoinTree::from_parts(
            vec![
                TreeNode::Leaf { clause: 0 },
                TreeNode::Leaf { clause: 1 },
                TreeNode::Internal { label: vs(&[1, 2]), children: vec![0, 1], grade: Grade::X },
            ],
            2,
        );
        assert_eq!(tree_width(&p, &t), 2);
    }

    #[test]
    fn bucket_single_clause_golden() {
        let p = parse_qdimacs("p cnf 2 1\na 2 0\ne 1 0\n1 2 0\n").unwrap();
        let t = bucket_elimination_tree(&p, &[v(1), v(2)]).unwrap();
        assert_eq!(
            t.nodes(),
            &[
                TreeNode::Leaf { clause: 0 },
                TreeNode::Internal { label: vs(&[1]), children: vec![0], grade: Grade::Y },
                TreeNode::Internal { label: vs(&[2]), children: vec![1], grade: Grade::X },
            ]
        );
        assert_eq!(t.root(), 2);
        assert_eq!(validate_tree(&p, &t), vec![]);
    }

    #[test]
    fn bucket_reproduces_figure_shape_from_inverse_mcs() {
        let p = running_example();
        let mut order = mcs_order(&build_gaifman(&p));
        order.reverse();
        let outputs_first: Vec<VarId> = order
            .iter()
            .filter(|&&u| p.is_output(u))
            .chain(order.iter().filter(|&&u| p.is_input(u)))
            .copied()
            .collect();
        assert_eq!(outputs_first, vec![v(6), v(4), v(5), v(3), v(2), v(1)]);
        let t = bucket_elimination_tree(&p, &outputs_first).unwrap();
        assert_eq!(validate_tree(&p, &t), vec![]);
        assert_eq!(tree_width(&p, &t), 4);

        // Same shape as the hand-built figure tree: labels, grades, and
        // child sets agree; only node numbering and child order differ.
        assert_eq!(t.label(t.root()), Some(&vs(&[1, 2])));
        let parents = t.parents();
        let labeler = |var: u32| {
            (0..t.len()).find(|&id| t.label(id).is_some_and(|l| l.contains(&v(var)))).unwrap()
        };
        let n_y4 = labeler(4);
        let n_y5 = labeler(5);
        let n_x3 = labeler(3);
        let n_y6 = labeler(6);
        assert_eq!(t.children(n_y4), &[0, 3]);
        assert_eq!(parents[n_y4], Some(n_y5));
        let y5_children: BTreeSet<usize> = t.children(n_y5).iter().copied().collect();
        assert_eq!(y5_children, BTreeSet::from([1, 4, n_y4]));
        assert_eq!(parents[n_y5], Some(n_x3));
        assert_eq!(parents[n_x3], Some(t.root()));
        assert_eq!(t.children(n_y6), &[2]);
        assert_eq!(parents[n_y6], Some(t.root()));
    }

    #[test]
    fn bucket_zero_clauses() {
        let p = parse_qdimacs("p cnf 0 0\n").unwrap();
        let t = bucket_elimination_tree(&p, &[]).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.label(t.root()), Some(&BTreeSet::new()));
        assert_eq!(validate_tree(&p, &t), vec![]);
    }

    #[test]
    fn bucket_rejects_bad_orders() {
        let p = running_example();
        assert!(matches!(
            bucket_elimination_tree(&p, &[v(1), v(2), v(3), v(4), v(5), v(6)]),
            Err(PlanError::OrderViolation(_))
        ));
        assert!(matches!(
            bucket_elimination_tree(&p, &[v(6), v(4), v(5), v(3), v(2)]),
            Err(PlanError::OrderViolation(_))
        ));
        assert!(matches!(
            bucket_elimination_tree(&p, &[v(6), v(6), v(4), v(5), v(3), v(2), v(1)]),
            Err(PlanError::OrderViolation(_))
        ));
    }

    #[test]
    fn unused_inputs_land_on_the_root() {
        let p = parse_qdimacs("p cnf 3 1\na 1 3 0\ne 2 0\n1 2 0\n").unwrap();
        let t = bucket_elimination_tree(&p, &[v(2), v(1)]).unwrap();
        assert_eq!(validate_tree(&p, &t), vec![]);
        assert!(t.label(t.root()).unwrap().contains(&v(3)));
    }

    #[test]
    fn unused_outputs_stay_out_of_the_tree() {
        let p = parse_qdimacs("p cnf 3 1\na 1 0\ne 2 3 0\n1 2 0\n").unwrap();
        let t = bucket_elimination_tree(&p, &[v(2), v(1)]).unwrap();
        assert_eq!(validate_tree(&p, &t), vec![]);
        assert!((0..t.len()).all(|id| t.label(id).is_none_or(|l| !l.contains(&v(3)))));
    }

    #[test]
    fn decomposition_tree_for_running_example() {
        let p = running_example();
        let td = min_fill_decomposition(&build_gaifman(&p));
        let t = decomposition_to_graded_tree(&p, &td).unwrap();
        assert_eq!(validate_tree(&p, &t), vec![]);
    }

    #[test]
    fn decomposition_rejects_uncovered_clause() {
        let p = running_example();
        let td = TreeDecomposition::new(vec![vs(&[1, 2, 3])], vec![]);
        assert!(matches!(
            decomposition_to_graded_tree(&p, &td),
            Err(PlanError::InvalidDecomposition(_))
        ));
    }

    #[test]
    fn degenerate_problems_get_trees() {
        // No outputs at all.
        let p = parse_qdimacs("p cnf 2 1\na 1 2 0\n1 2 0\n").unwrap();
        let t = bucket_elimination_tree(&p, &[v(1), v(2)]).unwrap();
        assert_eq!(validate_tree(&p, &t), vec![]);
        assert!(t.nodes().iter().all(|n| !matches!(n, TreeNode::Internal { grade: Grade::Y, .. })));

        // No inputs: output-graded nodes, possibly under an empty root.
        let p = parse_qdimacs("p cnf 2 2\ne 1 2 0\n1 0\n-1 2 0\n").unwrap();
        let t = bucket_elimination_tree(&p, &[v(1), v(2)]).unwrap();
        assert_eq!(validate_tree(&p, &t), vec![]);

        // Empty clause pending at the root.
        let p = parse_qdimacs("p cnf 1 2\na 1 0\n0\n1 0\n").unwrap();
        let t = bucket_elimination_tree(&p, &[v(1)]).unwrap();
        assert_eq!(validate_tree(&p, &t), vec![]);
    }

    #[test]
    fn dot_and_json_exports() {
        let p = running_example();
        let t = figure_tree();
        let dot = tree_to_dot(&p, &t);
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("n0 [shape=plaintext, label=\"1 4 -5\"];"));
        assert!(dot.contains("n9 [shape=box, label=\"e: 1,2\"];"));
        assert!(dot.contains("n6 [shape=ellipse, label=\"e: 5\"];"));
        assert!(dot.contains("n9 -> n7;"));

        let json = tree_to_json(&t);
        assert_eq!(json["root"], 9);
        assert_eq!(json["nodes"][0]["leaf"]["clause"], 0);
        assert_eq!(json["nodes"][9]["internal"]["label"], serde_json::json!([1, 2]));
        assert_eq!(json["nodes"][9]["internal"]["grade"], "x");
    }
}
