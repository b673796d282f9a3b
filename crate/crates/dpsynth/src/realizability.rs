//! Realizability classification by dynamic programming over a graded
//! project-join tree.
//!
//! Every node of the tree gets two BDDs: the pre-valuation (conjunction of
//! its children's post-valuations) and the post-valuation (pre with the
//! node's label variables existentially quantified). The output phase
//! evaluates leaves and output-graded nodes; if the instance is not
//! settled there, the input-graded remainder is re-evaluated over a
//! reduced tree whose leaves carry the surviving BDDs. The realizability
//! set `R(X)` collects exactly the input assignments admitting outputs.

use crate::bdd::{BddError, BddFunction, BddManager};
use crate::cnf::SynthesisProblem;
use crate::planner::{Grade, GradedProjectJoinTree, TreeNode};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

const FALSE_NODE: usize = 0;
const TRUE_NODE: usize = 1;

/// Pre/post valuations per node id, with the order nodes were valued in
/// (children always precede their parents).
#[derive(Clone, Debug, Default)]
pub struct NodeValuations {
    entries: BTreeMap<usize, (BddFunction, BddFunction)>,
    visitation: Vec<usize>,
}

impl NodeValuations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pre(&self, node: usize) -> Option<BddFunction> {
        self.entries.get(&node).map(|&(pre, _)| pre)
    }

    pub fn post(&self, node: usize) -> Option<BddFunction> {
        self.entries.get(&node).map(|&(_, post)| post)
    }

    pub fn visitation(&self) -> &[usize] {
        &self.visitation
    }

    fn record(&mut self, node: usize, pre: BddFunction, post: BddFunction) {
        self.entries.insert(node, (pre, post));
        self.visitation.push(node);
    }
}

/// Output-graded internal nodes whose parent is not output-graded: the
/// frontier where everything below has had its outputs quantified away.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XLeavesSet {
    nodes: Vec<usize>,
}

impl XLeavesSet {
    /// Ascending node id.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().copied()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
}

pub fn x_leaves(t: &GradedProjectJoinTree) -> XLeavesSet {
    let parents = t.parents();
    let nodes = (0..t.len())
        .filter(|&id| {
            t.grade(id) == Some(Grade::Y)
                && parents[id].is_none_or(|p| t.grade(p) != Some(Grade::Y))
        })
        .collect();
    XLeavesSet { nodes }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Verdict {
    Fully,
    Partially,
    Nullary,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Fully => write!(f, "fully"),
            Verdict::Partially => write!(f, "partially"),
            Verdict::Nullary => write!(f, "nullary"),
        }
    }
}

/// Final classification. `realizability_set` is a BDD over the inputs
/// only: TRUE when fully realizable, FALSE when nullary, a proper
/// function otherwise. `reduced_tree` is present iff the input-graded
/// phase had to run; `valuations` belong to the original tree and keep
/// every output-graded node's BDDs alive for witness synthesis.
#[derive(Clone, Debug)]
pub struct RealizabilityOutcome {
    pub verdict: Verdict,
    pub realizability_set: BddFunction,
    pub b_pure_x: BddFunction,
    pub reduced_tree: Option<GradedProjectJoinTree>,
    pub valuations: NodeValuations,
}

#[derive(Debug, Error)]
pub enum RealizabilityError {
    #[error("node {0} valued before its children")]
    MissingChildValuation(usize),
    #[error(transparent)]
    Bdd(#[from] BddError),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ValuationStep {
    Valued,
    /// A child post-valuation or an intermediate conjunction was FALSE;
    /// both valuations of the node were stored as FALSE.
    EarlyNullary,
}

/// Values one node from its children. Leaves take their BDD from
/// `leaf_bdds`, indexed by the leaf's clause field; internal nodes
/// conjoin child post-valuations in child order and then quantify the
/// label. Children must have been valued already.
pub fn generic_valuation(
    m: &mut BddManager,
    t: &GradedProjectJoinTree,
    leaf_bdds: &[BddFunction],
    n: usize,
    vals: &mut NodeValuations,
) -> Result<ValuationStep, RealizabilityError> {
    match t.node(n) {
        TreeNode::Leaf { clause } => {
            let b = leaf_bdds[*clause];
            vals.record(n, b, b);
            Ok(ValuationStep::Valued)
        }
        TreeNode::Internal { label, children, .. } => {
            let mut acc = m.mk_const(true);
            for &c in children {
                let post = vals.post(c).ok_or(RealizabilityError::MissingChildValuation(n))?;
                if post.node_id() == FALSE_NODE {
                    let f = m.mk_const(false);
                    vals.record(n, f, f);
                    return Ok(ValuationStep::EarlyNullary);
                }
                acc = m.apply_and(acc, post)?;
                if acc.node_id() == FALSE_NODE {
                    let f = m.mk_const(false);
                    vals.record(n, f, f);
                    return Ok(ValuationStep::EarlyNullary);
                }
            }
            let post = m.exists(acc, label.iter().copied())?;
            vals.record(n, acc, post);
            Ok(ValuationStep::Valued)
        }
    }
}

/// Output phase result: either the verdict is settled, or the reduced
/// input-graded tree is handed to [`high_valuation`].
#[derive(Debug)]
pub enum LowOutcome {
    Done(RealizabilityOutcome),
    HandOff(HandOff),
}

/// Reduced problem for the input phase: a tree whose internal nodes are
/// all input-graded and whose leaves carry already-computed BDDs (frontier
/// post-valuations, untouched clauses, and the pure-input conjunction as
/// an extra leaf under the root).
#[derive(Debug)]
pub struct HandOff {
    pub t_x: GradedProjectJoinTree,
    pub leaf_bdds: Vec<BddFunction>,
    pub b_pure_x: BddFunction,
    pub valuations: NodeValuations,
}

/// Output-phase classification: evaluates leaves and output-graded nodes
/// bottom-up. Settles Nullary (the pure-input conjunction is FALSE, an
/// early FALSE shows up, or some frontier post-valuation is FALSE) and
/// Fully (every frontier post-valuation is TRUE and the pure-input
/// conjunction is TRUE); everything else hands off. A tree without
/// output-graded nodes settles Fully only with a TRUE pure-input
/// conjunction and otherwise hands off, since unsatisfiable or partial
/// pure-input constraints still need the input phase.
pub fn low_valuation(
    m: &mut BddManager,
    p: &SynthesisProblem,
    t: &GradedProjectJoinTree,
) -> Result<LowOutcome, RealizabilityError> {
    let mut clause_bdds = Vec::with_capacity(p.clauses().len());
    for clause in p.clauses() {
        clause_bdds.push(m.clause_to_bdd(clause)?);
    }
    let mut b_pure_x = m.mk_const(true);
    for i in p.pure_x_clauses() {
        b_pure_x = m.apply_and(b_pure_x, clause_bdds[i])?;
    }

    if b_pure_x.node_id() == FALSE_NODE {
        return nullary_outcome(m, NodeValuations::new(), b_pure_x);
    }

    let frontier = x_leaves(t);
    let mut vals = NodeValuations::new();

    if frontier.is_empty() {
        if b_pure_x.node_id() == TRUE_NODE {
            return Ok(LowOutcome::Done(RealizabilityOutcome {
                verdict: Verdict::Fully,
                realizability_set: m.mk_const(true),
                b_pure_x,
                reduced_tree: None,
                valuations: vals,
            }));
        }
        let (t_x, leaf_bdds) = build_reduced_tree(t, &clause_bdds, &vals, &frontier, b_pure_x);
        return Ok(LowOutcome::HandOff(HandOff { t_x, leaf_bdds, b_pure_x, valuations: vals }));
    }

    for id in t.postorder() {
        let is_y_internal = t.grade(id) == Some(Grade::Y);
        if !t.is_leaf(id) && !is_y_internal {
            continue;
        }
        // Leaves below input-graded nodes get valued too; the reduced
        // tree rebuilds from clause BDDs, so that is only bookkeeping.
        match generic_valuation(m, t, &clause_bdds, id, &mut vals)? {
            ValuationStep::Valued => {}
            ValuationStep::EarlyNullary => return nullary_outcome(m, vals, b_pure_x),
        }
    }

    let mut all_true = true;
    for n in frontier.iter() {
        let post = vals.post(n).expect("frontier valued in the output phase");
        if post.node_id() == FALSE_NODE {
            return nullary_outcome(m, vals, b_pure_x);
        }
        if post.node_id() != TRUE_NODE {
            all_true = false;
        }
    }
    if all_true && b_pure_x.node_id() == TRUE_NODE {
        return Ok(LowOutcome::Done(RealizabilityOutcome {
            verdict: Verdict::Fully,
            realizability_set: m.mk_const(true),
            b_pure_x,
            reduced_tree: None,
            valuations: vals,
        }));
    }

    let (t_x, leaf_bdds) = build_reduced_tree(t, &clause_bdds, &vals, &frontier, b_pure_x);
    Ok(LowOutcome::HandOff(HandOff { t_x, leaf_bdds, b_pure_x, valuations: vals }))
}

fn nullary_outcome(
    m: &mut BddManager,
    valuations: NodeValuations,
    b_pure_x: BddFunction,
) -> Result<LowOutcome, RealizabilityError> {
    Ok(LowOutcome::Done(RealizabilityOutcome {
        verdict: Verdict::Nullary,
        realizability_set: m.mk_const(false),
        b_pure_x,
        reduced_tree: None,
        valuations,
    }))
}

/// Copies the input-graded skeleton of `t`, turning frontier nodes and
/// untouched clause leaves into leaves over `leaf_bdds`, and adds the
/// pure-input conjunction as one more leaf under the root. When the whole
/// tree is output-graded a fresh empty-labeled root holds the leaves.
fn build_reduced_tree(
    t: &GradedProjectJoinTree,
    clause_bdds: &[BddFunction],
    vals: &NodeValuations,
    frontier: &XLeavesSet,
    b_pure_x: BddFunction,
) -> (GradedProjectJoinTree, Vec<BddFunction>) {
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut leaf_bdds: Vec<BddFunction> = Vec::new();

    fn copy_x(
        t: &GradedProjectJoinTree,
        clause_bdds: &[BddFunction],
        vals: &NodeValuations,
        frontier: &XLeavesSet,
        nodes: &mut Vec<TreeNode>,
        leaf_bdds: &mut Vec<BddFunction>,
        id: usize,
    ) -> usize {
        let mk_leaf = |nodes: &mut Vec<TreeNode>, leaf_bdds: &mut Vec<BddFunction>, b| {
            let new_id = nodes.len();
            nodes.push(TreeNode::Leaf { clause: leaf_bdds.len() });
            leaf_bdds.push(b);
            new_id
        };
        match t.node(id) {
            TreeNode::Leaf { clause } => mk_leaf(nodes, leaf_bdds, clause_bdds[*clause]),
            TreeNode::Internal { grade: Grade::Y, .. } => {
                debug_assert!(frontier.contains(id));
                let post = vals.post(id).expect("frontier valued before reduction");
                mk_leaf(nodes, leaf_bdds, post)
            }
            TreeNode::Internal { label, children, grade: Grade::X } => {
                let new_children: Vec<usize> = children
                    .iter()
                    .map(|&c| copy_x(t, clause_bdds, vals, frontier, nodes, leaf_bdds, c))
                    .collect();
                let new_id = nodes.len();
                nodes.push(TreeNode::Internal {
                    label: label.clone(),
                    children: new_children,
                    grade: Grade::X,
                });
                new_id
            }
        }
    }

    let mut root = if t.grade(t.root()) == Some(Grade::X) {
        copy_x(t, clause_bdds, vals, frontier, &mut nodes, &mut leaf_bdds, t.root())
    } else {
        // Output-graded root: the reduced tree is a single synthetic root
        // over the root's post-valuation.
        let post = vals.post(t.root()).expect("root valued in the output phase");
        nodes.push(TreeNode::Leaf { clause: 0 });
        leaf_bdds.push(post);
        nodes.len() - 1
    };
    if matches!(nodes[root], TreeNode::Leaf { .. }) {
        nodes.push(TreeNode::Internal {
            label: Default::default(),
            children: vec![root],
            grade: Grade::X,
        });
        root = nodes.len() - 1;
    }

    let extra = nodes.len();
    nodes.push(TreeNode::Leaf { clause: leaf_bdds.len() });
    leaf_bdds.push(b_pure_x);
    match &mut nodes[root] {
        TreeNode::Internal { children, .. } => children.push(extra),
        TreeNode::Leaf { .. } => unreachable!("reduced root is always internal"),
    }

    (GradedProjectJoinTree::from_parts(nodes, root), leaf_bdds)
}

/// Input-phase classification over the reduced tree: Nullary iff the
/// root's post-valuation is FALSE, else Partially. The realizability set
/// is the plain conjunction of the reduced tree's leaf BDDs, which is the
/// pure-input conjunction with every frontier post-valuation.
pub fn high_valuation(
    m: &mut BddManager,
    h: HandOff,
) -> Result<RealizabilityOutcome, RealizabilityError> {
    let HandOff { t_x, leaf_bdds, b_pure_x, valuations } = h;
    let mut vals = NodeValuations::new();
    let mut early = false;
    for id in t_x.postorder() {
        match generic_valuation(m, &t_x, &leaf_bdds, id, &mut vals)? {
            ValuationStep::Valued => {}
            ValuationStep::EarlyNullary => {
                early = true;
                break;
            }
        }
    }
    let root_post =
        if early { m.mk_const(false) } else { vals.post(t_x.root()).expect("root valued last") };

    if root_post.node_id() == FALSE_NODE {
        return Ok(RealizabilityOutcome {
            verdict: Verdict::Nullary,
            realizability_set: m.mk_const(false),
            b_pure_x,
            reduced_tree: Some(t_x),
            valuations,
        });
    }

    let mut set = m.mk_const(true);
    for &b in &leaf_bdds {
        set = m.apply_and(set, b)?;
    }
    debug_assert!(set.node_id() != TRUE_NODE && set.node_id() != FALSE_NODE);
    Ok(RealizabilityOutcome {
        verdict: Verdict::Partially,
        realizability_set: set,
        b_pure_x,
        reduced_tree: Some(t_x),
        valuations,
    })
}

/// Full classification: the output phase, then the input phase when
/// needed.
pub fn decide_realizability(
    m: &mut BddManager,
    p: &SynthesisProblem,
    t: &GradedProjectJoinTree,
) -> Result<RealizabilityOutcome, RealizabilityError> {
    match low_valuation(m, p, t)? {
        LowOutcome::Done(outcome) => Ok(outcome),
        LowOutcome::HandOff(h) => high_valuation(m, h),
    }
}
