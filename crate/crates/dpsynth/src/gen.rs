//! Seeded random instances and plans for the property-test harness.
//!
//! Everything here is deterministic in the seed, so a failing run can be
//! replayed by exporting `DPSYNTH_SEED`.

use crate::cnf::{Clause, Literal, SynthesisProblem, VarId};
use crate::planner::{bucket_elimination_tree, GradedProjectJoinTree};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SEED_ENV_VAR: &str = "DPSYNTH_SEED";

/// Seed override from the environment, if set. Panics on an unparsable
/// value so a typo does not silently change the tested corpus.
pub fn seed_from_env() -> Option<u64> {
    std::env::var(SEED_ENV_VAR).ok().map(|raw| {
        raw.parse().unwrap_or_else(|_| {
            panic!("{SEED_ENV_VAR} must be an unsigned 64-bit integer, got {raw:?}")
        })
    })
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub max_inputs: usize,
    pub max_outputs: usize,
    pub max_clauses: usize,
    pub max_clause_len: usize,
    /// Chance, out of 100, of inserting one empty clause.
    pub empty_clause_pct: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_inputs: 6,
            max_outputs: 6,
            max_clauses: 30,
            max_clause_len: 4,
            empty_clause_pct: 2,
        }
    }
}

/// Random instance within the configured bounds. Inputs come first in
/// the numbering, then outputs; at least one variable always exists.
/// Short clauses are favored so that all three verdicts show up.
pub fn random_problem(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> SynthesisProblem {
    let nx = rng.gen_range(0..=cfg.max_inputs);
    let min_ny = usize::from(nx == 0);
    let ny = rng.gen_range(min_ny..=cfg.max_outputs.max(min_ny));
    let nvars = nx + ny;
    let inputs: Vec<VarId> = (1..=nx as u32).map(VarId::new).collect();
    let outputs: Vec<VarId> = (nx as u32 + 1..=nvars as u32).map(VarId::new).collect();
    let all_vars: Vec<VarId> = inputs.iter().chain(&outputs).copied().collect();

    let nclauses = rng.gen_range(0..=cfg.max_clauses);
    let mut clauses = Vec::with_capacity(nclauses);
    for _ in 0..nclauses {
        if rng.gen_range(0..100) < cfg.empty_clause_pct {
            clauses.push(Clause::new([]));
            continue;
        }
        let max_len = cfg.max_clause_len.min(nvars);
        // 1 + min of two rolls biases toward unit and binary clauses.
        let a = rng.gen_range(0..max_len);
        let b = rng.gen_range(0..max_len);
        let len = 1 + a.min(b);
        let mut vars = all_vars.clone();
        vars.shuffle(rng);
        vars.truncate(len);
        clauses.push(Clause::new(vars.into_iter().map(|v| {
            if rng.gen() {
                Literal::pos(v)
            } else {
                Literal::neg(v)
            }
        })));
    }
    SynthesisProblem::new(inputs, outputs, clauses)
        .expect("generated variables are disjoint and clauses stay in range")
}

/// Random admissible elimination order: the outputs shuffled, then the
/// inputs shuffled.
pub fn random_order(rng: &mut ChaCha8Rng, p: &SynthesisProblem) -> Vec<VarId> {
    let mut ys: Vec<VarId> = p.outputs().to_vec();
    ys.shuffle(rng);
    let mut xs: Vec<VarId> = p.inputs().to_vec();
    xs.shuffle(rng);
    ys.extend(xs);
    ys
}

/// Random valid plan, via bucket elimination on a random order.
pub fn random_plan(rng: &mut ChaCha8Rng, p: &SynthesisProblem) -> GradedProjectJoinTree {
    let order = random_order(rng, p);
    bucket_elimination_tree(p, &order).expect("shuffled full order is admissible")
}
