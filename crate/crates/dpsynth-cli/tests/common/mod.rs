//! Helpers shared by the integration suites: reference evaluation by
//! truth table, the figure tree from the docs, and pipeline shorthands.

#![allow(dead_code)]

use dpsynth::bdd::{BddFunction, BddManager};
use dpsynth::cnf::{parse_qdimacs, SynthesisProblem, VarId};
use dpsynth::planner::{
    bucket_elimination_tree, build_gaifman, decomposition_to_graded_tree, mcs_order,
    min_fill_decomposition, Grade, GradedProjectJoinTree, TreeNode,
};
use dpsynth::realizability::{decide_realizability, RealizabilityOutcome};
use std::collections::{BTreeMap, BTreeSet, HashMap};

pub const RUNNING_EXAMPLE: &str = "\
p cnf 6 5
a 1 2 3 0
e 4 5 6 0
1 4 -5 0
-3 2 -5 0
-1 2 6 0
-3 1 -4 0
1 -2 3 5 0
";

pub fn v(id: u32) -> VarId {
    VarId::new(id)
}

pub fn running_example() -> SynthesisProblem {
    parse_qdimacs(RUNNING_EXAMPLE).expect("bundled instance parses")
}

/// The worked example's tree: clauses at leaves 0..=4, output nodes for
/// y4, y5, y6, an input node for x3, and a root labeled {x1, x2}.
pub fn figure_tree() -> GradedProjectJoinTree {
    let label = |ids: &[u32]| -> BTreeSet<VarId> { ids.iter().map(|&i| v(i)).collect() };
    let nodes = vec![
        TreeNode::Leaf { clause: 0 },
        TreeNode::Leaf { clause: 1 },
        TreeNode::Leaf { clause: 2 },
        TreeNode::Leaf { clause: 3 },
        TreeNode::Leaf { clause: 4 },
        TreeNode::Internal { label: label(&[4]), children: vec![0, 3], grade: Grade::Y },
        TreeNode::Internal { label: label(&[5]), children: vec![4, 1, 5], grade: Grade::Y },
        TreeNode::Internal { label: label(&[3]), children: vec![6], grade: Grade::X },
        TreeNode::Internal { label: label(&[6]), children: vec![2], grade: Grade::Y },
        TreeNode::Internal { label: label(&[1, 2]), children: vec![7, 8], grade: Grade::X },
    ];
    GradedProjectJoinTree::from_parts(nodes, 9)
}

/// Manager over the interaction-graph search order, as the CLI builds it.
pub fn mgr_for(p: &SynthesisProblem) -> BddManager {
    let g = build_gaifman(p);
    BddManager::new(mcs_order(&g))
}

pub fn plan_treedecomp(p: &SynthesisProblem) -> GradedProjectJoinTree {
    let g = build_gaifman(p);
    let td = min_fill_decomposition(&g);
    decomposition_to_graded_tree(p, &td).expect("decomposition covers the instance")
}

pub fn plan_bucket(p: &SynthesisProblem) -> GradedProjectJoinTree {
    let mut order: Vec<VarId> = p.outputs().to_vec();
    order.sort();
    let mut xs: Vec<VarId> = p.inputs().to_vec();
    xs.sort();
    order.extend(xs);
    bucket_elimination_tree(p, &order).expect("sorted full order is admissible")
}

pub fn solve_with(
    p: &SynthesisProblem,
    t: &GradedProjectJoinTree,
) -> (BddManager, RealizabilityOutcome) {
    let mut m = mgr_for(p);
    let outcome = decide_realizability(&mut m, p, t).expect("pipeline succeeds");
    (m, outcome)
}

pub fn sorted_inputs(p: &SynthesisProblem) -> Vec<VarId> {
    let mut xs = p.inputs().to_vec();
    xs.sort();
    xs
}

/// All assignments over `vars`, as maps, in lexicographic order (false
/// before true, first variable most significant).
pub fn assignments(vars: &[VarId]) -> Vec<BTreeMap<VarId, bool>> {
    let n = vars.len();
    (0u64..(1u64 << n))
        .map(|mask| {
            vars.iter().enumerate().map(|(i, &var)| (var, mask >> (n - 1 - i) & 1 == 1)).collect()
        })
        .collect()
}

pub fn eval_bdd(m: &BddManager, f: BddFunction, asg: &BTreeMap<VarId, bool>) -> bool {
    let lookup: HashMap<VarId, bool> = asg.iter().map(|(&k, &b)| (k, b)).collect();
    m.eval(f, &lookup).expect("assignment covers the support")
}

/// Plain recursive pre/post valuation, written independently of the
/// incremental evaluator so the two can be compared.
pub fn recursive_valuation(
    m: &mut BddManager,
    t: &GradedProjectJoinTree,
    clause_bdds: &[BddFunction],
    node: usize,
) -> (BddFunction, BddFunction) {
    match t.node(node) {
        TreeNode::Leaf { clause } => (clause_bdds[*clause], clause_bdds[*clause]),
        TreeNode::Internal { label, children, .. } => {
            let mut pre = m.mk_const(true);
            for &c in children {
                let (_, post) = recursive_valuation(m, t, clause_bdds, c);
                pre = m.apply_and(pre, post).unwrap();
            }
            let post = m.exists(pre, label.iter().copied()).unwrap();
            (pre, post)
        }
    }
}

/// Random boolean expression with an evaluator of its own, so BDD
/// operations can be checked against direct truth tables.
#[derive(Clone, Debug)]
pub enum Expr {
    Const(bool),
    Var(VarId),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
}

pub fn eval_expr(e: &Expr, asg: &BTreeMap<VarId, bool>) -> bool {
    match e {
        Expr::Const(b) => *b,
        Expr::Var(v) => asg[v],
        Expr::Not(a) => !eval_expr(a, asg),
        Expr::And(a, b) => eval_expr(a, asg) && eval_expr(b, asg),
        Expr::Or(a, b) => eval_expr(a, asg) || eval_expr(b, asg),
        Expr::Xor(a, b) => eval_expr(a, asg) ^ eval_expr(b, asg),
    }
}

pub fn expr_to_bdd(m: &mut BddManager, e: &Expr) -> BddFunction {
    match e {
        Expr::Const(b) => m.mk_const(*b),
        Expr::Var(v) => m.mk_var(*v).unwrap(),
        Expr::Not(a) => {
            let f = expr_to_bdd(m, a);
            m.negate(f).unwrap()
        }
        Expr::And(a, b) => {
            let fa = expr_to_bdd(m, a);
            let fb = expr_to_bdd(m, b);
            m.apply_and(fa, fb).unwrap()
        }
        Expr::Or(a, b) => {
            let fa = expr_to_bdd(m, a);
            let fb = expr_to_bdd(m, b);
            m.apply_or(fa, fb).unwrap()
        }
        Expr::Xor(a, b) => {
            let fa = expr_to_bdd(m, a);
            let fb = expr_to_bdd(m, b);
            m.apply_xor(fa, fb).unwrap()
        }
    }
}
