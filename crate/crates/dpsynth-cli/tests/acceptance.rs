//! Acceptance gate: one test per release criterion, each printing its
//! own pass/fail line through the harness. The random-instance checks
//! share one seeded stream; set DPSYNTH_SEED to replay a run.

mod common;

use common::*;
use dpsynth::bdd::{BddFunction, BddManager};
use dpsynth::cnf::{SynthesisProblem, VarId};
use dpsynth::gen::{random_plan, random_problem, rng_for, seed_from_env, GenConfig};
use dpsynth::planner::{tree_width, GradedProjectJoinTree};
use dpsynth::realizability::{generic_valuation, ValuationStep, Verdict};
use dpsynth::synthesis::{dp_synth, dp_synth_with_trace, factored_baseline};
use dpsynth::verify::{oracle_realizability, verify_witnesses};
use rand::Rng;
use std::collections::BTreeSet;
use std::process;
use std::time::Instant;

const DEFAULT_SEED: u64 = 0xDEC1DE;
const STREAM_LEN: usize = 500;

fn seeded_instances(count: usize) -> Vec<(SynthesisProblem, GradedProjectJoinTree)> {
    let seed = seed_from_env().unwrap_or(DEFAULT_SEED);
    let mut rng = rng_for(seed);
    let cfg = GenConfig::default();
    (0..count)
        .map(|_| {
            let p = random_problem(&mut rng, &cfg);
            let t = random_plan(&mut rng, &p);
            (p, t)
        })
        .collect()
}

/// End to end on the worked example: fully realizable, witnesses equal
/// to the hand-derived functions, and finished well inside a second.
#[test]
fn criterion_1_worked_example_end_to_end() {
    let start = Instant::now();
    let p = running_example();
    let t = figure_tree();
    let (mut m, outcome) = solve_with(&p, &t);
    assert_eq!(outcome.verdict, Verdict::Fully);
    assert_eq!(outcome.realizability_set, m.mk_const(true));

    let w = dp_synth(&mut m, &p, &t, &outcome).unwrap();
    let x1 = m.mk_var(v(1)).unwrap();
    let x2 = m.mk_var(v(2)).unwrap();
    let x3 = m.mk_var(v(3)).unwrap();
    let not_x3 = m.negate(x3).unwrap();
    let expect_w4 = m.apply_or(x1, not_x3).unwrap();
    let x1_and_x2 = m.apply_and(x1, x2).unwrap();
    let expect_w5 = m.apply_or(x1_and_x2, not_x3).unwrap();
    let expect_w6 = m.mk_const(true);

    assert_eq!(w.get(v(4)), Some(expect_w4));
    assert_eq!(w.get(v(5)), Some(expect_w5));
    assert_eq!(w.get(v(6)), Some(expect_w6));
    assert_eq!(w.synthesis_order(), &[v(5), v(6), v(4)]);

    assert!(start.elapsed().as_secs_f64() < 1.0, "took {:?}", start.elapsed());
}

/// Verdict and realizability set agree with exhaustive enumeration on
/// every streamed instance, across three plans and the factored
/// baseline.
#[test]
fn criterion_2_verdicts_match_enumeration_on_random_instances() {
    let mut seen = BTreeSet::new();
    for (idx, (p, random_tree)) in seeded_instances(STREAM_LEN).iter().enumerate() {
        let oracle = oracle_realizability(p, 20).unwrap();
        seen.insert(oracle.verdict);
        let xs = sorted_inputs(p);
        let asgs = assignments(&xs);

        let plans = [
            ("treedecomp", plan_treedecomp(p)),
            ("bucket", plan_bucket(p)),
            ("random", random_tree.clone()),
        ];
        for (kind, t) in &plans {
            let (m, outcome) = solve_with(p, t);
            assert_eq!(
                outcome.verdict, oracle.verdict,
                "instance {idx}, {kind} plan: verdict mismatch"
            );
            for asg in &asgs {
                assert_eq!(
                    eval_bdd(&m, outcome.realizability_set, asg),
                    oracle.realizable_inputs.contains(asg),
                    "instance {idx}, {kind} plan: realizability set differs at {asg:?}"
                );
            }
        }

        let mut m = mgr_for(p);
        let order: Vec<usize> = (0..p.clauses().len()).collect();
        let (outcome, _) = factored_baseline(&mut m, p, &order).unwrap();
        assert_eq!(outcome.verdict, oracle.verdict, "instance {idx}, baseline: verdict mismatch");
        for asg in &asgs {
            assert_eq!(
                eval_bdd(&m, outcome.realizability_set, asg),
                oracle.realizable_inputs.contains(asg),
                "instance {idx}, baseline: realizability set differs at {asg:?}"
            );
        }
    }
    assert_eq!(seen.len(), 3, "stream should exercise all three verdicts, saw {seen:?}");
}

/// Every witness map produced on the stream verifies: substituting the
/// witnesses into the clauses covers the realizability set, re-checked
/// assignment by assignment.
#[test]
fn criterion_3_synthesized_witnesses_always_verify() {
    let mut verified = 0usize;
    for (idx, (p, random_tree)) in seeded_instances(STREAM_LEN).iter().enumerate() {
        for (kind, t) in [("treedecomp", &plan_treedecomp(p)), ("random", random_tree)] {
            let (mut m, outcome) = solve_with(p, t);
            if outcome.verdict == Verdict::Nullary {
                continue;
            }
            let w = dp_synth(&mut m, p, t, &outcome).unwrap();
            let report = verify_witnesses(&mut m, p, outcome.realizability_set, &w, 20).unwrap();
            assert!(
                report.ok,
                "instance {idx}, {kind} plan: counterexample {:?}",
                report.counterexample
            );
            assert!(report.counterexample.is_none());
            assert!(report.checked_count >= 1, "instance {idx}: nothing enumerated");
            verified += 1;
        }

        let mut m = mgr_for(p);
        let order: Vec<usize> = (0..p.clauses().len()).collect();
        let (outcome, w) = factored_baseline(&mut m, p, &order).unwrap();
        if outcome.verdict == Verdict::Nullary {
            continue;
        }
        let report = verify_witnesses(&mut m, p, outcome.realizability_set, &w, 20).unwrap();
        assert!(report.ok, "instance {idx}, baseline: counterexample {:?}", report.counterexample);
        verified += 1;
    }
    assert!(verified > STREAM_LEN / 2, "only {verified} witness maps verified");
}

/// The incremental node valuation agrees with a plain recursive
/// evaluation: exact hand goldens on the worked example, then full
/// agreement on hundreds of random trees.
#[test]
fn criterion_4_valuations_match_recursive_reference() {
    let p = running_example();
    let t = figure_tree();
    let (mut m, outcome) = solve_with(&p, &t);

    let x1 = m.mk_var(v(1)).unwrap();
    let x3 = m.mk_var(v(3)).unwrap();
    let y5 = m.mk_var(v(5)).unwrap();
    let not_x3 = m.negate(x3).unwrap();
    let not_y5 = m.negate(y5).unwrap();
    let tmp = m.apply_or(x1, not_y5).unwrap();
    let expect_post5 = m.apply_or(tmp, not_x3).unwrap();
    assert_eq!(outcome.valuations.post(5), Some(expect_post5));
    assert_eq!(outcome.valuations.post(6), Some(m.mk_const(true)));
    assert_eq!(outcome.valuations.post(8), Some(m.mk_const(true)));

    let mut trees = 0usize;
    for (p, t) in seeded_instances(250) {
        let mut m = mgr_for(&p);
        let clause_bdds: Vec<BddFunction> =
            p.clauses().iter().map(|c| m.clause_to_bdd(c).unwrap()).collect();

        let mut vals = dpsynth::realizability::NodeValuations::new();
        for n in t.postorder() {
            let step = generic_valuation(&mut m, &t, &clause_bdds, n, &mut vals).unwrap();
            let (ref_pre, ref_post) = recursive_valuation(&mut m, &t, &clause_bdds, n);
            match step {
                ValuationStep::Valued => {
                    assert_eq!(vals.pre(n), Some(ref_pre), "pre mismatch at node {n}");
                    assert_eq!(vals.post(n), Some(ref_post), "post mismatch at node {n}");
                }
                ValuationStep::EarlyNullary => {
                    // The short-circuit only fires when the true product
                    // is FALSE, so the reference must agree.
                    assert_eq!(ref_pre, m.mk_const(false), "spurious short-circuit at {n}");
                    assert_eq!(ref_post, m.mk_const(false));
                    break;
                }
            }
        }
        trees += 1;
    }
    assert!(trees >= 200, "only {trees} random trees checked");
}

/// Scope audit: at the moment each node is synthesized, any output
/// variable still mentioned by its pre-valuation is labeled at the node
/// itself or one of its ancestors.
#[test]
fn criterion_5_synthesis_scopes_stay_within_ancestor_labels() {
    let mut steps_checked = 0usize;
    for (idx, (p, random_tree)) in seeded_instances(STREAM_LEN).iter().enumerate() {
        for (kind, t) in [("treedecomp", &plan_treedecomp(p)), ("random", random_tree)] {
            let (mut m, outcome) = solve_with(p, t);
            if outcome.verdict == Verdict::Nullary {
                continue;
            }
            let (_, trace) = dp_synth_with_trace(&mut m, p, t, &outcome).unwrap();
            let parents = t.parents();
            for step in &trace.steps {
                let mut allowed: BTreeSet<VarId> = t.label(step.node).unwrap().clone();
                let mut cur = step.node;
                while let Some(par) = parents[cur] {
                    if let Some(l) = t.label(par) {
                        allowed.extend(l.iter().copied());
                    }
                    cur = par;
                }
                for &var in &step.pre_support {
                    if p.is_output(var) {
                        assert!(
                            allowed.contains(&var),
                            "instance {idx}, {kind} plan: output {var} out of scope at node {}",
                            step.node
                        );
                    }
                }
                steps_checked += 1;
            }
        }
    }
    assert!(steps_checked > STREAM_LEN, "only {steps_checked} synthesis steps audited");
}

/// Kernel operations against brute-force truth tables over six
/// variables, plus canonicity identities, across more than ten thousand
/// operation instances.
#[test]
fn criterion_6_bdd_operations_match_truth_tables() {
    let seed = seed_from_env().unwrap_or(DEFAULT_SEED);
    let mut rng = rng_for(seed ^ 0x6b6e_726c);
    let vars: Vec<VarId> = (1..=6).map(v).collect();
    let asgs = assignments(&vars);
    let mut ops = 0usize;

    fn random_expr(rng: &mut impl Rng, vars: &[VarId], depth: usize) -> Expr {
        if depth == 0 || rng.gen_range(0..5) == 0 {
            return if rng.gen_range(0..8) == 0 {
                Expr::Const(rng.gen())
            } else {
                Expr::Var(vars[rng.gen_range(0..vars.len())])
            };
        }
        let a = Box::new(random_expr(rng, vars, depth - 1));
        match rng.gen_range(0..4) {
            0 => Expr::Not(a),
            1 => Expr::And(a, Box::new(random_expr(rng, vars, depth - 1))),
            2 => Expr::Or(a, Box::new(random_expr(rng, vars, depth - 1))),
            _ => Expr::Xor(a, Box::new(random_expr(rng, vars, depth - 1))),
        }
    }

    for _ in 0..1500 {
        let mut m = BddManager::new(vars.clone());
        let ea = random_expr(&mut rng, &vars, 4);
        let eb = random_expr(&mut rng, &vars, 4);
        let fa = expr_to_bdd(&mut m, &ea);
        let fb = expr_to_bdd(&mut m, &eb);

        let and_ab = m.apply_and(fa, fb).unwrap();
        let or_ab = m.apply_or(fa, fb).unwrap();
        let xor_ab = m.apply_xor(fa, fb).unwrap();
        let not_a = m.negate(fa).unwrap();

        let quant: Vec<VarId> = vars.iter().copied().filter(|_| rng.gen_range(0..3) == 0).collect();
        let ex = m.exists(fa, quant.iter().copied()).unwrap();

        let rv = vars[rng.gen_range(0..vars.len())];
        let rb: bool = rng.gen();
        let restricted = m.restrict(fa, rv, rb).unwrap();

        let cv = vars[rng.gen_range(0..vars.len())];
        let composed = m.compose(fa, cv, fb).unwrap();

        for asg in &asgs {
            let a = eval_expr(&ea, asg);
            let b = eval_expr(&eb, asg);
            assert_eq!(eval_bdd(&m, and_ab, asg), a && b);
            assert_eq!(eval_bdd(&m, or_ab, asg), a || b);
            assert_eq!(eval_bdd(&m, xor_ab, asg), a ^ b);
            assert_eq!(eval_bdd(&m, not_a, asg), !a);

            // exists: true iff some valuation of the quantified set works
            let expected_ex = asgs
                .iter()
                .filter(|other| vars.iter().all(|vr| quant.contains(vr) || other[vr] == asg[vr]))
                .any(|other| eval_expr(&ea, other));
            assert_eq!(eval_bdd(&m, ex, asg), expected_ex);

            let mut pinned = asg.clone();
            pinned.insert(rv, rb);
            assert_eq!(eval_bdd(&m, restricted, asg), eval_expr(&ea, &pinned));

            let mut substituted = asg.clone();
            substituted.insert(cv, b);
            assert_eq!(eval_bdd(&m, composed, asg), eval_expr(&ea, &substituted));
        }
        ops += 7;

        // Canonicity: equal functions share one node id.
        assert_eq!(and_ab, m.apply_and(fb, fa).unwrap());
        let not_b = m.negate(fb).unwrap();
        let de_morgan = m.apply_or(not_a, not_b).unwrap();
        assert_eq!(m.negate(and_ab).unwrap(), de_morgan);
        assert_eq!(m.negate(not_a).unwrap(), fa);
        ops += 5;
    }
    assert!(ops >= 10_000, "only {ops} operation instances checked");
}

/// The bundled corpus benches clean: every fixture completes on both
/// engines with verdicts agreeing, statistics recorded, and the worked
/// example's tree width coming out at its known value.
#[test]
fn criterion_7_bundled_corpus_benches_with_stats() {
    let p = running_example();
    assert_eq!(tree_width(&p, &figure_tree()), 4);

    let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("bench.csv");
    let out = process::Command::new(env!("CARGO_BIN_EXE_dpsynth"))
        .args(["bench", fixtures, "--engines", "both", "--csv"])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "bench failed: {}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| {
        header.iter().position(|&h| h == name).unwrap_or_else(|| panic!("missing column {name}"))
    };
    let verdicts = ["fully", "partially", "nullary"];

    let mut rows = 0usize;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let instance = cells[0];
        for engine in ["dpsynth", "baseline"] {
            let cell = |name: &str| cells[col(&format!("{engine}_{name}"))];
            assert!(
                verdicts.contains(&cell("verdict")),
                "{instance}/{engine}: bad verdict {:?}",
                cell("verdict")
            );
            assert!(cell("end_to_end_ms").parse::<u128>().is_ok(), "{instance}/{engine}: no time");
            assert!(
                cell("peak_nodes").parse::<usize>().unwrap() >= 2,
                "{instance}/{engine}: no peak"
            );
            assert!(
                ["ok", "skipped"].contains(&cell("verification")),
                "{instance}/{engine}: verification {:?}",
                cell("verification")
            );
        }
        assert_eq!(
            cells[col("dpsynth_verdict")],
            cells[col("baseline_verdict")],
            "{instance}: engines disagree"
        );
        let width: usize = cells[col("dpsynth_tree_width")].parse().unwrap();
        assert!(width >= 1, "{instance}: width not recorded");
        rows += 1;
    }
    assert!(rows >= 20, "only {rows} fixtures benched");
}
