//! Reduced ordered binary decision diagram kernel.
//!
//! A [`BddManager`] owns an append-only node store shared by every function
//! it builds. The variable order is fixed at creation; there is no dynamic
//! reordering, no garbage collection, and no complement edges. Entry 0 of
//! the store is the FALSE terminal and entry 1 is the TRUE terminal, so
//! `peak_nodes` is simply the store length: nodes are never reclaimed
//! within a solve, which keeps the peak measurement exact.
//!
//! Canonicity: reduction (merging equal triples, suppressing nodes whose
//! branches coincide) is enforced in the single node constructor, so two
//! functions in the same manager are semantically equal iff their node
//! identifiers are equal. Every operation routes through a computed cache
//! keyed by (operation tag, operand identifiers).

use crate::cnf::{Clause, VarId};
use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

/// Levels grow from the root down; terminals sit below every variable.
const TERMINAL_LEVEL: u32 = u32::MAX;

const FALSE_ID: u32 = 0;
const TRUE_ID: u32 = 1;

static NEXT_MANAGER_ID: AtomicU64 = AtomicU64::new(0);

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
struct Node {
    level: u32,
    low: u32,
    high: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum CacheKey {
    And(u32, u32),
    Or(u32, u32),
    Xor(u32, u32),
    Exists(u32, u32),
    Restrict(u32, u32, bool),
}

/// Handle to one function inside one manager. Copyable; the node it names
/// stays live for the manager's whole lifetime.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct BddFunction {
    mgr_id: u64,
    id: u32,
}

impl BddFunction {
    /// Store index of the root node. Identifiers are canonical: within one
    /// manager, equal identifiers mean equal functions.
    pub fn node_id(&self) -> usize {
        self.id as usize
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BddError {
    #[error("variable {0} is not registered in this manager's order")]
    UnknownVariable(VarId),
    #[error("operands belong to different managers")]
    ManagerMismatch,
    #[error("assignment does not cover variable {0}")]
    IncompleteAssignment(VarId),
}

pub struct BddManager {
    mgr_id: u64,
    /// level -> variable at that level.
    order: Vec<VarId>,
    level_of: HashMap<VarId, u32>,
    /// nodes[0] = FALSE, nodes[1] = TRUE; append-only.
    nodes: Vec<Node>,
    unique: HashMap<Node, u32>,
    cache: HashMap<CacheKey, u32>,
}

impl BddManager {
    /// The order is total and fixed: position in `order` is the level, the
    /// root of any diagram carries the smallest level of its support.
    pub fn new(order: impl IntoIterator<Item = VarId>) -> Self {
        let order: Vec<VarId> = order.into_iter().collect();
        let mut level_of = HashMap::new();
        for (lvl, &v) in order.iter().enumerate() {
            let prev = level_of.insert(v, lvl as u32);
            assert!(prev.is_none(), "variable {} listed twice in the order", v);
        }
        let terminal = Node { level: TERMINAL_LEVEL, low: 0, high: 0 };
        BddManager {
            mgr_id: NEXT_MANAGER_ID.fetch_add(1, Ordering::Relaxed),
            order,
            level_of,
            nodes: vec![terminal, terminal],
            unique: HashMap::new(),
            cache: HashMap::new(),
        }
    }

    pub fn order(&self) -> &[VarId] {
        &self.order
    }

    /// Total nodes ever allocated, terminals included. Monotone over the
    /// manager's lifetime since the store is append-only.
    pub fn peak_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn mk_const(&mut self, b: bool) -> BddFunction {
        self.wrap(if b { TRUE_ID } else { FALSE_ID })
    }

    pub fn mk_var(&mut self, v: VarId) -> Result<BddFunction, BddError> {
        let lvl = self.level(v)?;
        let id = self.mk_node(lvl, FALSE_ID, TRUE_ID);
        Ok(self.wrap(id))
    }

    pub fn apply_and(&mut self, f: BddFunction, g: BddFunction) -> Result<BddFunction, BddError> {
        let (f, g) = self.check_pair(f, g)?;
        let id = self.and_rec(f, g);
        Ok(self.wrap(id))
    }

    pub fn apply_or(&mut self, f: BddFunction, g: BddFunction) -> Result<BddFunction, BddError> {
        let (f, g) = self.check_pair(f, g)?;
        let id = self.or_rec(f, g);
        Ok(self.wrap(id))
    }

    pub fn apply_xor(&mut self, f: BddFunction, g: BddFunction) -> Result<BddFunction, BddError> {
        let (f, g) = self.check_pair(f, g)?;
        let id = self.xor_rec(f, g);
        Ok(self.wrap(id))
    }

    /// XOR against TRUE; no complement edges, so this allocates like any
    /// other apply and hits the same cache.
    pub fn negate(&mut self, f: BddFunction) -> Result<BddFunction, BddError> {
        let f = self.check(f)?;
        let id = self.xor_rec(f, TRUE_ID);
        Ok(self.wrap(id))
    }

    /// Existential quantification over a set of variables, performed one
    /// variable at a time, deepest level first.
    pub fn exists(
        &mut self,
        f: BddFunction,
        vars: impl IntoIterator<Item = VarId>,
    ) -> Result<BddFunction, BddError> {
        let mut id = self.check(f)?;
        let mut levels = vars.into_iter().map(|v| self.level(v)).collect::<Result<Vec<_>, _>>()?;
        levels.sort_unstable();
        levels.dedup();
        for lvl in levels.into_iter().rev() {
            id = self.exists_rec(id, lvl);
        }
        Ok(self.wrap(id))
    }

    /// Cofactor: `f` with `v` fixed to `b`.
    pub fn restrict(&mut self, f: BddFunction, v: VarId, b: bool) -> Result<BddFunction, BddError> {
        let f = self.check(f)?;
        let lvl = self.level(v)?;
        let id = self.restrict_rec(f, lvl, b);
        Ok(self.wrap(id))
    }

    /// Functional composition: the result maps `τ` to `f(τ[v := g(τ)])`.
    /// Built from the two cofactors of `f` on `v`, so it reuses the apply
    /// caches rather than carrying a cache tag of its own.
    pub fn compose(
        &mut self,
        f: BddFunction,
        v: VarId,
        g: BddFunction,
    ) -> Result<BddFunction, BddError> {
        let (f, g) = self.check_pair(f, g)?;
        let lvl = self.level(v)?;
        let f1 = self.restrict_rec(f, lvl, true);
        let f0 = self.restrict_rec(f, lvl, false);
        let not_g = self.xor_rec(g, TRUE_ID);
        let hi = self.and_rec(g, f1);
        let lo = self.and_rec(not_g, f0);
        let id = self.or_rec(hi, lo);
        Ok(self.wrap(id))
    }

    /// Follows the root-to-terminal path selected by the assignment.
    /// Only variables on that path need to be assigned.
    pub fn eval(
        &self,
        f: BddFunction,
        assignment: &HashMap<VarId, bool>,
    ) -> Result<bool, BddError> {
        let mut id = self.check(f)?;
        loop {
            let node = self.nodes[id as usize];
            if node.level == TERMINAL_LEVEL {
                return Ok(id == TRUE_ID);
            }
            let var = self.order[node.level as usize];
            match assignment.get(&var) {
                None => return Err(BddError::IncompleteAssignment(var)),
                Some(false) => id = node.low,
                Some(true) => id = node.high,
            }
        }
    }

    /// Variables labeling nodes reachable from `f`, ascending by id.
    pub fn support(&self, f: BddFunction) -> Result<BTreeSet<VarId>, BddError> {
        let f = self.check(f)?;
        let mut vars = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![f];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            let node = self.nodes[id as usize];
            if node.level != TERMINAL_LEVEL {
                vars.insert(self.order[node.level as usize]);
                stack.push(node.low);
                stack.push(node.high);
            }
        }
        Ok(vars)
    }

    /// Nodes reachable from `f`, terminals included.
    pub fn node_count(&self, f: BddFunction) -> Result<usize, BddError> {
        let f = self.check(f)?;
        let mut seen = BTreeSet::new();
        let mut stack = vec![f];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            let node = self.nodes[id as usize];
            if node.level != TERMINAL_LEVEL {
                stack.push(node.low);
                stack.push(node.high);
            }
        }
        Ok(seen.len())
    }

    /// Expression-tree export: `{"const": b}`, `{"var": v}`, or
    /// `{"ite": {"var": v, "hi": ..., "lo": ...}}`, where a node testing `v`
    /// with branches TRUE/FALSE collapses to `{"var": v}`. Shared subgraphs
    /// are duplicated; the output is a tree, not the DAG.
    pub fn expr_json(&self, f: BddFunction) -> Result<serde_json::Value, BddError> {
        let f = self.check(f)?;
        Ok(self.expr_json_rec(f))
    }

    fn expr_json_rec(&self, id: u32) -> serde_json::Value {
        let node = self.nodes[id as usize];
        if node.level == TERMINAL_LEVEL {
            return serde_json::json!({ "const": id == TRUE_ID });
        }
        let var = self.order[node.level as usize].get();
        if node.low == FALSE_ID && node.high == TRUE_ID {
            return serde_json::json!({ "var": var });
        }
        let mut ite = serde_json::Map::new();
        ite.insert("var".into(), var.into());
        ite.insert("hi".into(), self.expr_json_rec(node.high));
        ite.insert("lo".into(), self.expr_json_rec(node.low));
        serde_json::json!({ "ite": ite })
    }

    /// Disjunction of the clause's literals; the empty clause is FALSE and
    /// a tautological clause comes out as TRUE without special-casing.
    pub fn clause_to_bdd(&mut self, clause: &Clause) -> Result<BddFunction, BddError> {
        let mut acc = self.mk_const(false);
        for &lit in clause.literals() {
            let v = self.mk_var(lit.var)?;
            let l = if lit.negated { self.negate(v)? } else { v };
            acc = self.apply_or(acc, l)?;
        }
        Ok(acc)
    }

    fn wrap(&self, id: u32) -> BddFunction {
        BddFunction { mgr_id: self.mgr_id, id }
    }

    fn check(&self, f: BddFunction) -> Result<u32, BddError> {
        if f.mgr_id != self.mgr_id {
            return Err(BddError::ManagerMismatch);
        }
        debug_assert!((f.id as usize) < self.nodes.len());
        Ok(f.id)
    }

    fn check_pair(&self, f: BddFunction, g: BddFunction) -> Result<(u32, u32), BddError> {
        Ok((self.check(f)?, self.check(g)?))
    }

    fn level(&self, v: VarId) -> Result<u32, BddError> {
        self.level_of.get(&v).copied().ok_or(BddError::UnknownVariable(v))
    }

    /// Sole node constructor; both reduction rules live here.
    fn mk_node(&mut self, level: u32, low: u32, high: u32) -> u32 {
        if low == high {
            return low;
        }
        let node = Node { level, low, high };
        if let Some(&id) = self.unique.get(&node) {
            return id;
        }
        let id = u32::try_from(self.nodes.len()).expect("node store exceeds u32 range");
        self.nodes.push(node);
        self.unique.insert(node, id);
        id
    }

    fn and_rec(&mut self, f: u32, g: u32) -> u32 {
        if f == FALSE_ID || g == FALSE_ID {
            return FALSE_ID;
        }
        if f == TRUE_ID {
            return g;
        }
        if g == TRUE_ID || f == g {
            return f;
        }
        let key = CacheKey::And(f.min(g), f.max(g));
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let (level, f0, f1, g0, g1) = self.split(f, g);
        let low = self.and_rec(f0, g0);
        let high = self.and_rec(f1, g1);
        let r = self.mk_node(level, low, high);
        self.cache.insert(key, r);
        r
    }

    fn or_rec(&mut self, f: u32, g: u32) -> u32 {
        if f == TRUE_ID || g == TRUE_ID {
            return TRUE_ID;
        }
        if f == FALSE_ID {
            return g;
        }
        if g == FALSE_ID || f == g {
            return f;
        }
        let key = CacheKey::Or(f.min(g), f.max(g));
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let (level, f0, f1, g0, g1) = self.split(f, g);
        let low = self.or_rec(f0, g0);
        let high = self.or_rec(f1, g1);
        let r = self.mk_node(level, low, high);
        self.cache.insert(key, r);
        r
    }

    fn xor_rec(&mut self, f: u32, g: u32) -> u32 {
        if f == g {
            return FALSE_ID;
        }
        if f == FALSE_ID {
            return g;
        }
        if g == FALSE_ID {
            return f;
        }
        if f == TRUE_ID && g == TRUE_ID {
            return FALSE_ID;
        }
        let key = CacheKey::Xor(f.min(g), f.max(g));
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let (level, f0, f1, g0, g1) = self.split(f, g);
        let low = self.xor_rec(f0, g0);
        let high = self.xor_rec(f1, g1);
        let r = self.mk_node(level, low, high);
        self.cache.insert(key, r);
        r
    }

    fn exists_rec(&mut self, f: u32, lvl: u32) -> u32 {
        let node = self.nodes[f as usize];
        if node.level > lvl {
            // The quantified level cannot occur below here: levels only
            // grow along edges.
            return f;
        }
        if node.level == lvl {
            return self.or_rec(node.low, node.high);
        }
        let key = CacheKey::Exists(f, lvl);
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let low = self.exists_rec(node.low, lvl);
        let high = self.exists_rec(node.high, lvl);
        let r = self.mk_node(node.level, low, high);
        self.cache.insert(key, r);
        r
    }

    fn restrict_rec(&mut self, f: u32, lvl: u32, b: bool) -> u32 {
        let node = self.nodes[f as usize];
        if node.level > lvl {
            return f;
        }
        if node.level == lvl {
            return if b { node.high } else { node.low };
        }
        let key = CacheKey::Restrict(f, lvl, b);
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let low = self.restrict_rec(node.low, lvl, b);
        let high = self.restrict_rec(node.high, lvl, b);
        let r = self.mk_node(node.level, low, high);
        self.cache.insert(key, r);
        r
    }

    /// Shannon split of both operands at their top level.
    fn split(&self, f: u32, g: u32) -> (u32, u32, u32, u32, u32) {
        let fn_ = self.nodes[f as usize];
        let gn = self.nodes[g as usize];
        let level = fn_.level.min(gn.level);
        let (f0, f1) = if fn_.level == level { (fn_.low, fn_.high) } else { (f, f) };
        let (g0, g1) = if gn.level == level { (gn.low, gn.high) } else { (g, g) };
        (level, f0, f1, g0, g1)
    }
}
