//! Independent correctness checks: a brute-force enumeration oracle for
//! realizability, and witness verification at both the BDD level and the
//! assignment level.
//!
//! The oracle works straight off the clause list so that it shares no
//! code with the BDD pipeline it is checking.

use crate::bdd::{BddError, BddFunction, BddManager};
use crate::cnf::{SynthesisProblem, VarId};
use crate::realizability::Verdict;
use crate::synthesis::WitnessMap;
use serde_json::{json, Map, Value};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

/// Total assignment to some variable set, keyed ascending.
pub type Assignment = BTreeMap<VarId, bool>;

pub const DEFAULT_ORACLE_BOUND: usize = 20;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("instance has {vars} variables, above the enumeration bound {bound}")]
    TooLarge { vars: usize, bound: usize },
    #[error("witness for {y} depends on output variable {bad}")]
    SupportViolation { y: VarId, bad: VarId },
    #[error("no witness provided for output {0}")]
    MissingWitness(VarId),
    #[error(transparent)]
    Bdd(#[from] BddError),
}

/// Ground-truth classification from full enumeration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResult {
    pub verdict: Verdict,
    pub realizable_inputs: BTreeSet<Assignment>,
}

/// Does the assignment satisfy every clause? All clause variables must
/// be present.
pub fn eval_clauses(p: &SynthesisProblem, assignment: &Assignment) -> bool {
    p.clauses()
        .iter()
        .all(|clause| clause.literals().iter().any(|lit| assignment[&lit.var] == !lit.negated))
}

fn enumerate_assignments(vars: &[VarId]) -> impl Iterator<Item = Assignment> + '_ {
    let n = vars.len();
    (0u64..(1u64 << n)).map(move |mask| {
        vars.iter().enumerate().map(|(i, &v)| (v, mask >> (n - 1 - i) & 1 == 1)).collect()
    })
}

/// Classifies the instance by trying every input assignment against
/// every output assignment. Cost is 2^(|X|+|Y|) clause scans, so the
/// total variable count must stay within `bound`.
pub fn oracle_realizability(
    p: &SynthesisProblem,
    bound: usize,
) -> Result<OracleResult, VerifyError> {
    let vars = p.inputs().len() + p.outputs().len();
    // 63 caps the mask arithmetic no matter how generous the caller is.
    if vars > bound.min(63) {
        return Err(VerifyError::TooLarge { vars, bound });
    }
    let mut xs: Vec<VarId> = p.inputs().to_vec();
    xs.sort();
    let mut ys: Vec<VarId> = p.outputs().to_vec();
    ys.sort();

    let mut realizable_inputs = BTreeSet::new();
    for sigma in enumerate_assignments(&xs) {
        let mut realizable = false;
        for tau in enumerate_assignments(&ys) {
            let mut full = sigma.clone();
            full.extend(tau);
            if eval_clauses(p, &full) {
                realizable = true;
                break;
            }
        }
        if realizable {
            realizable_inputs.insert(sigma);
        }
    }

    let total = 1u64 << xs.len();
    let verdict = if realizable_inputs.len() as u64 == total {
        Verdict::Fully
    } else if realizable_inputs.is_empty() {
        Verdict::Nullary
    } else {
        Verdict::Partially
    };
    Ok(OracleResult { verdict, realizable_inputs })
}

/// Verification record. `ok=false` always comes with the
/// lexicographically smallest input assignment (false before true, in
/// ascending variable order) on which the substituted matrix fails
/// inside the realizability set. `checked_count` is the number of
/// realizable input assignments re-checked by enumeration, zero when the
/// instance exceeded the bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessReport {
    pub ok: bool,
    pub counterexample: Option<Assignment>,
    pub checked_count: usize,
}

impl WitnessReport {
    pub fn to_json(&self) -> Value {
        let counterexample = match &self.counterexample {
            None => Value::Null,
            Some(cex) => {
                let mut tab = Map::new();
                for (v, &b) in cex {
                    tab.insert(v.to_string(), json!(if b { 1 } else { 0 }));
                }
                Value::Object(tab)
            }
        };
        json!({
            "ok": self.ok,
            "counterexample": counterexample,
            "checked_count": self.checked_count,
        })
    }
}

/// Lexicographically smallest satisfying assignment over `vars`
/// (ascending, false preferred), assuming `f` is satisfiable and its
/// support lies within `vars`.
fn lex_smallest_model(
    m: &mut BddManager,
    f: BddFunction,
    vars: &[VarId],
) -> Result<Assignment, BddError> {
    let mut g = f;
    let mut out = Assignment::new();
    for &v in vars {
        let g0 = m.restrict(g, v, false)?;
        if g0.node_id() != 0 {
            out.insert(v, false);
            g = g0;
        } else {
            out.insert(v, true);
            g = m.restrict(g, v, true)?;
        }
    }
    debug_assert_eq!(g.node_id(), 1, "support escaped the given variables");
    Ok(out)
}

/// Checks the witness map against the realizability set: substitutes
/// every witness into the clause conjunction and requires the result to
/// cover `r`. Within `enum_bound` total variables the same condition is
/// re-established assignment by assignment.
pub fn verify_witnesses(
    m: &mut BddManager,
    p: &SynthesisProblem,
    r: BddFunction,
    w: &WitnessMap,
    enum_bound: usize,
) -> Result<WitnessReport, VerifyError> {
    for &y in p.outputs() {
        let g = w.get(y).ok_or(VerifyError::MissingWitness(y))?;
        if let Some(&bad) = m.support(g)?.iter().find(|&&v| p.is_output(v)) {
            return Err(VerifyError::SupportViolation { y, bad });
        }
    }

    let mut phi = m.mk_const(true);
    for clause in p.clauses() {
        let b = m.clause_to_bdd(clause)?;
        phi = m.apply_and(phi, b)?;
    }
    let mut substituted = phi;
    for &y in p.outputs() {
        let g = w.get(y).expect("domain checked above");
        substituted = m.compose(substituted, y, g)?;
    }
    let not_f = m.negate(substituted)?;
    let gap = m.apply_and(r, not_f)?;

    let mut xs: Vec<VarId> = p.inputs().to_vec();
    xs.sort();
    let mut ok = gap.node_id() == 0;
    let mut counterexample = if ok { None } else { Some(lex_smallest_model(m, gap, &xs)?) };

    let mut checked_count = 0;
    if p.inputs().len() + p.outputs().len() <= enum_bound.min(63) {
        for sigma in enumerate_assignments(&xs) {
            let lookup: HashMap<VarId, bool> = sigma.iter().map(|(&v, &b)| (v, b)).collect();
            if !m.eval(r, &lookup)? {
                continue;
            }
            checked_count += 1;
            let mut full = sigma.clone();
            for &y in p.outputs() {
                let g = w.get(y).expect("domain checked above");
                full.insert(y, m.eval(g, &lookup)?);
            }
            if !eval_clauses(p, &full) && ok {
                // Unreachable if the BDD-level check is correct; kept so
                // a kernel defect surfaces as a failed report rather
                // than silence.
                ok = false;
                counterexample = Some(sigma);
            }
        }
    }

    if let Some(cex) = &counterexample {
        let lookup: HashMap<VarId, bool> = cex.iter().map(|(&v, &b)| (v, b)).collect();
        let mut full = cex.clone();
        for &y in p.outputs() {
            full.insert(y, m.eval(w.get(y).unwrap(), &lookup)?);
        }
        debug_assert!(
            m.eval(r, &lookup)? && !eval_clauses(p, &full),
            "counterexample does not witness a failure"
        );
    }

    Ok(WitnessReport { ok, counterexample, checked_count })
}
