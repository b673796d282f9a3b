//! Witness construction for realizable instances.
//!
//! Three routes produce witness functions `W_y(X)`:
//! the single-BDD chain ([`solve_eqn`]), the tree-guided top-down pass
//! ([`dp_synth`]) which runs `solve_eqn` per node label and substitutes
//! fresh witnesses into descendant pre-valuations, and a factored
//! baseline ([`factored_baseline`]) that quantifies clause by clause
//! without a tree.

use crate::bdd::{BddError, BddFunction, BddManager};
use crate::cnf::{SynthesisProblem, VarId};
use crate::planner::{Grade, GradedProjectJoinTree, TreeNode};
use crate::realizability::{RealizabilityOutcome, Verdict};
use serde_json::{json, Map, Value};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Witness functions keyed by output variable, remembering the order in
/// which they were produced.
#[derive(Clone, Debug, Default)]
pub struct WitnessMap {
    table: BTreeMap<VarId, BddFunction>,
    order: Vec<VarId>,
}

impl WitnessMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, y: VarId, w: BddFunction) {
        let previous = self.table.insert(y, w);
        assert!(previous.is_none(), "second witness for {y}");
        self.order.push(y);
    }

    pub fn get(&self, y: VarId) -> Option<BddFunction> {
        self.table.get(&y).copied()
    }

    pub fn contains(&self, y: VarId) -> bool {
        self.table.contains_key(&y)
    }

    /// Pairs in production order.
    pub fn iter(&self) -> impl Iterator<Item = (VarId, BddFunction)> + '_ {
        self.order.iter().map(|&y| (y, self.table[&y]))
    }

    pub fn synthesis_order(&self) -> &[VarId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Intermediate BDDs of one [`solve_eqn`] run, kept for inspection.
#[derive(Clone, Debug)]
pub struct SolveEqnChain {
    levels: Vec<BddFunction>,
    primed: Vec<BddFunction>,
}

impl SolveEqnChain {
    /// `levels()[i]` is B_i: the input with the last `k - i` variables
    /// quantified away; `levels()[k]` is the input itself.
    pub fn levels(&self) -> &[BddFunction] {
        &self.levels
    }

    /// `primed()[i - 1]` is B'_i: B_i with the first `i - 1` witnesses
    /// substituted.
    pub fn primed(&self) -> &[BddFunction] {
        &self.primed
    }
}

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("witness synthesis invoked on a nullary instance")]
    NotRealizable,
    #[error("no pre-valuation recorded for node {0}")]
    MissingPreValuation(usize),
    #[error(transparent)]
    Bdd(#[from] BddError),
}

/// One-variable witness: wherever `exists y. B` holds, `y := B[y -> 1]`
/// satisfies B.
pub fn witness_single(
    m: &mut BddManager,
    b: BddFunction,
    y: VarId,
) -> Result<BddFunction, BddError> {
    m.restrict(b, y, true)
}

/// Witnesses for a block of variables out of a single BDD. Quantifies
/// inside-out (last variable first, giving B_k .. B_0), then extracts
/// witnesses outside-in: each B_i gets the earlier witnesses substituted
/// before its own variable is cofactored to true. Witnesses may mention
/// any variable of `b` outside `ys`.
pub fn solve_eqn(
    m: &mut BddManager,
    b: BddFunction,
    ys: &[VarId],
) -> Result<(WitnessMap, SolveEqnChain), SynthesisError> {
    let distinct: BTreeSet<VarId> = ys.iter().copied().collect();
    assert_eq!(distinct.len(), ys.len(), "solve_eqn variables must be distinct");

    let mut levels = vec![b];
    let mut cur = b;
    for &y in ys.iter().rev() {
        cur = m.exists(cur, [y])?;
        levels.push(cur);
    }
    levels.reverse();

    let mut fragment = WitnessMap::new();
    let mut primed = Vec::with_capacity(ys.len());
    for (i, &y) in ys.iter().enumerate() {
        let mut bi = levels[i + 1];
        for (prev, g) in fragment.iter() {
            bi = m.compose(bi, prev, g)?;
        }
        primed.push(bi);
        let g = m.restrict(bi, y, true)?;
        fragment.insert(y, g);
    }
    Ok((fragment, SolveEqnChain { levels, primed }))
}

/// Support of the pre-valuation at the moment a node's witnesses were
/// extracted; lets callers audit the scoping guarantee (the output
/// variables seen there lie within the node's own and its ancestors'
/// labels).
#[derive(Clone, Debug)]
pub struct SynthesisStep {
    pub node: usize,
    pub pre_support: BTreeSet<VarId>,
}

#[derive(Clone, Debug, Default)]
pub struct SynthesisTrace {
    pub steps: Vec<SynthesisStep>,
}

/// Tree-guided synthesis: processes the output frontier first and then
/// descends layer by layer through output-graded children. Each node's
/// witnesses come from [`solve_eqn`] on its (possibly already
/// substituted) pre-valuation over the node's label in ascending order;
/// immediately afterwards they are composed into the pre-valuations of
/// all output-graded descendants. Output variables not labeled anywhere
/// default to TRUE. All returned witnesses depend on inputs only.
pub fn dp_synth(
    m: &mut BddManager,
    p: &SynthesisProblem,
    t: &GradedProjectJoinTree,
    outcome: &RealizabilityOutcome,
) -> Result<WitnessMap, SynthesisError> {
    dp_synth_with_trace(m, p, t, outcome).map(|(w, _)| w)
}

pub fn dp_synth_with_trace(
    m: &mut BddManager,
    p: &SynthesisProblem,
    t: &GradedProjectJoinTree,
    outcome: &RealizabilityOutcome,
) -> Result<(WitnessMap, SynthesisTrace), SynthesisError> {
    if outcome.verdict == Verdict::Nullary {
        return Err(SynthesisError::NotRealizable);
    }

    let frontier = crate::realizability::x_leaves(t);
    let mut pres: BTreeMap<usize, BddFunction> = BTreeMap::new();
    for id in 0..t.len() {
        if t.grade(id) == Some(Grade::Y) {
            let pre = outcome.valuations.pre(id).ok_or(SynthesisError::MissingPreValuation(id))?;
            pres.insert(id, pre);
        }
    }

    let mut witnesses = WitnessMap::new();
    let mut trace = SynthesisTrace::default();
    let mut layer: Vec<usize> = frontier.iter().collect();
    while !layer.is_empty() {
        let mut next = Vec::new();
        for &n in &layer {
            let pre = pres[&n];
            trace.steps.push(SynthesisStep { node: n, pre_support: m.support(pre)? });
            let label: Vec<VarId> = match t.node(n) {
                TreeNode::Internal { label, .. } => label.iter().copied().collect(),
                TreeNode::Leaf { .. } => unreachable!("layers hold internal nodes only"),
            };
            let (fragment, _) = solve_eqn(m, pre, &label)?;

            let descendants = y_descendants(t, n);
            for &d in &descendants {
                let mut pd = pres[&d];
                for (y, g) in fragment.iter() {
                    pd = m.compose(pd, y, g)?;
                }
                pres.insert(d, pd);
            }
            for (y, g) in fragment.iter() {
                witnesses.insert(y, g);
            }
            for &c in t.children(n) {
                if !t.is_leaf(c) {
                    next.push(c);
                }
            }
        }
        layer = next;
    }

    for &y in p.outputs() {
        if !witnesses.contains(y) {
            witnesses.insert(y, m.mk_const(true));
        }
    }

    debug_assert!(witnesses.iter().all(|(_, w)| m
        .support(w)
        .unwrap()
        .iter()
        .all(|&v| p.is_input(v))));
    Ok((witnesses, trace))
}

/// Output-graded strict descendants of `n`, in DFS order. Children of an
/// output-graded node are leaves or output-graded, so the walk never
/// crosses grades.
fn y_descendants(t: &GradedProjectJoinTree, n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack: Vec<usize> = t.children(n).iter().rev().copied().collect();
    while let Some(id) = stack.pop() {
        if t.is_leaf(id) {
            continue;
        }
        debug_assert_eq!(t.grade(id), Some(Grade::Y));
        out.push(id);
        stack.extend(t.children(id).iter().rev().copied());
    }
    out
}

/// Tree-free baseline: treats the clauses, in the given order, as a
/// chain of factors. Each output variable belongs to the first factor it
/// occurs in; realizability quantifies factor by factor from the inside
/// out (B_m = TRUE, B_{j-1} = exists Y_j. F_j and B_j, so B_0 is the
/// realizability set), and witnesses come back out layer by layer from
/// F_k and B_k with the earlier layers' witnesses substituted. A nullary
/// instance yields an empty witness map.
pub fn factored_baseline(
    m: &mut BddManager,
    p: &SynthesisProblem,
    factor_order: &[usize],
) -> Result<(RealizabilityOutcome, WitnessMap), SynthesisError> {
    let clauses = p.clauses();
    {
        let mut seen: Vec<usize> = factor_order.to_vec();
        seen.sort_unstable();
        assert_eq!(
            seen,
            (0..clauses.len()).collect::<Vec<_>>(),
            "factor order must permute the clause indices"
        );
    }

    let mut factor_bdds = Vec::with_capacity(factor_order.len());
    for &ci in factor_order {
        factor_bdds.push(m.clause_to_bdd(&clauses[ci])?);
    }
    let mut b_pure_x = m.mk_const(true);
    for i in p.pure_x_clauses() {
        let b = m.clause_to_bdd(&clauses[i])?;
        b_pure_x = m.apply_and(b_pure_x, b)?;
    }

    // Output blocks: variable y sits in the block of the first factor
    // mentioning it, so every later occurrence is inside that block's
    // quantification scope.
    let mut first_seen: BTreeMap<VarId, usize> = BTreeMap::new();
    for (j, &ci) in factor_order.iter().enumerate() {
        for v in clauses[ci].variables() {
            if p.is_output(v) {
                first_seen.entry(v).or_insert(j);
            }
        }
    }
    let mut blocks: Vec<Vec<VarId>> = vec![Vec::new(); factor_order.len()];
    for (&y, &j) in &first_seen {
        blocks[j].push(y);
    }

    let mut chain = vec![m.mk_const(true); factor_order.len() + 1];
    for j in (0..factor_order.len()).rev() {
        let conj = m.apply_and(factor_bdds[j], chain[j + 1])?;
        chain[j] = m.exists(conj, blocks[j].iter().copied())?;
    }
    let b0 = chain[0];

    let verdict = if b0.node_id() == 1 {
        Verdict::Fully
    } else if b0.node_id() == 0 {
        Verdict::Nullary
    } else {
        Verdict::Partially
    };
    let outcome = RealizabilityOutcome {
        verdict,
        realizability_set: b0,
        b_pure_x,
        reduced_tree: None,
        valuations: Default::default(),
    };

    let mut witnesses = WitnessMap::new();
    if verdict != Verdict::Nullary {
        for j in 0..factor_order.len() {
            if blocks[j].is_empty() {
                continue;
            }
            let mut ck = m.apply_and(factor_bdds[j], chain[j + 1])?;
            for (y, g) in witnesses.iter() {
                ck = m.compose(ck, y, g)?;
            }
            let (fragment, _) = solve_eqn(m, ck, &blocks[j])?;
            for (y, g) in fragment.iter() {
                witnesses.insert(y, g);
            }
        }
        for &y in p.outputs() {
            if !witnesses.contains(y) {
                witnesses.insert(y, m.mk_const(true));
            }
        }
    }
    Ok((outcome, witnesses))
}

/// Witness file shape: inputs, outputs, and one expression per output
/// variable, keyed ascending.
pub fn witnesses_to_json(
    m: &BddManager,
    p: &SynthesisProblem,
    w: &WitnessMap,
) -> Result<Value, BddError> {
    let mut table = Map::new();
    for (y, b) in w.table.iter() {
        table.insert(y.to_string(), m.expr_json(*b)?);
    }
    Ok(json!({
        "inputs": p.inputs().iter().map(|v| v.get()).collect::<Vec<_>>(),
        "outputs": p.outputs().iter().map(|v| v.get()).collect::<Vec<_>>(),
        "witnesses": Value::Object(table),
    }))
}
