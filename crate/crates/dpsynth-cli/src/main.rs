//! Command-line front end: plan inspection, end-to-end solving, and a
//! small benchmark harness over a directory of QDIMACS files.

use clap::{Parser, Subcommand, ValueEnum};
use dpsynth::bdd::BddManager;
use dpsynth::cnf::{parse_qdimacs, SynthesisProblem, VarId};
use dpsynth::planner::{
    bucket_elimination_tree, build_gaifman, decomposition_to_graded_tree, mcs_order,
    min_fill_decomposition, tree_to_dot, tree_to_json, tree_width, validate_tree,
    GradedProjectJoinTree,
};
use dpsynth::realizability::{decide_realizability, Verdict};
use dpsynth::synthesis::{dp_synth, factored_baseline, witnesses_to_json};
use dpsynth::verify::{verify_witnesses, DEFAULT_ORACLE_BOUND};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

const EXIT_FULLY: i32 = 0;
const EXIT_ERROR: i32 = 1;
const EXIT_INPUT: i32 = 2;
const EXIT_PARTIALLY: i32 = 10;
const EXIT_NULLARY: i32 = 20;
const EXIT_TIMEOUT: i32 = 30;

/// Realizability and witness synthesis for forall-exists CNF instances.
#[derive(Parser)]
#[command(name = "dpsynth", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum PlannerKind {
    /// Min-fill tree decomposition of the variable interaction graph
    Treedecomp,
    /// Bucket elimination over outputs then inputs, ascending
    Bucket,
}

impl PlannerKind {
    fn label(self) -> &'static str {
        match self {
            PlannerKind::Treedecomp => "treedecomp",
            PlannerKind::Bucket => "bucket",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum EngineKind {
    /// Graded project-join tree pipeline
    Dpsynth,
    /// Tree-free factored chain over the clauses in file order
    Baseline,
}

impl EngineKind {
    fn label(self) -> &'static str {
        match self {
            EngineKind::Dpsynth => "dpsynth",
            EngineKind::Baseline => "baseline",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum EngineSelection {
    Dpsynth,
    Baseline,
    Both,
}

impl EngineSelection {
    fn engines(self) -> Vec<EngineKind> {
        match self {
            EngineSelection::Dpsynth => vec![EngineKind::Dpsynth],
            EngineSelection::Baseline => vec![EngineKind::Baseline],
            EngineSelection::Both => vec![EngineKind::Dpsynth, EngineKind::Baseline],
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a graded project-join tree and validate it
    Plan {
        /// QDIMACS input file
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = PlannerKind::Treedecomp)]
        planner: PlannerKind,
        /// Write the tree in DOT format
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Write the tree as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Decide realizability and synthesize witness functions
    Solve {
        /// QDIMACS input file
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = PlannerKind::Treedecomp)]
        planner: PlannerKind,
        #[arg(long, value_enum, default_value_t = EngineKind::Dpsynth)]
        engine: EngineKind,
        /// Write witness functions as JSON (skipped when nullary)
        #[arg(long)]
        witnesses: Option<PathBuf>,
        /// Write timing and size statistics as JSON
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Check the witnesses against the realizability set
        #[arg(long)]
        verify: bool,
        /// Variable budget for enumeration-based checking
        #[arg(long, default_value_t = DEFAULT_ORACLE_BOUND)]
        max_oracle_vars: usize,
        /// Give up after this many seconds
        #[arg(long)]
        timeout: Option<u64>,
    },
    /// Solve every .qdimacs file in a directory and tabulate results
    Bench {
        /// Directory of QDIMACS files
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineSelection::Both)]
        engines: EngineSelection,
        /// Per-solve time budget in seconds
        #[arg(long)]
        timeout: Option<u64>,
        /// Write the results table as CSV (defaults to stdout)
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Serialize)]
struct SolveStats {
    instance: String,
    engine: String,
    planner: Option<String>,
    tree_width: Option<usize>,
    plan_ms: Option<u128>,
    compile_ms: u128,
    realizability_ms: u128,
    synthesis_ms: u128,
    end_to_end_ms: u128,
    peak_nodes: usize,
    verdict: String,
    verification: String,
}

struct SolveOutput {
    stats: SolveStats,
    witnesses_json: Option<String>,
    verdict: Verdict,
    verification_failed: bool,
}

enum SolveFailure {
    Plan(String),
    Internal(String),
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Plan { file, planner, dot, json } => cmd_plan(&file, planner, dot, json),
        Command::Solve {
            file,
            planner,
            engine,
            witnesses,
            stats,
            verify,
            max_oracle_vars,
            timeout,
        } => cmd_solve(&file, planner, engine, witnesses, stats, verify, max_oracle_vars, timeout),
        Command::Bench { dir, engines, timeout, csv } => cmd_bench(&dir, engines, timeout, csv),
    };
    std::process::exit(code);
}

fn instance_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_problem(path: &Path) -> Result<SynthesisProblem, i32> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_INPUT
    })?;
    let p = parse_qdimacs(&text).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_INPUT
    })?;
    for w in p.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(p)
}

fn plan_tree(p: &SynthesisProblem, kind: PlannerKind) -> Result<GradedProjectJoinTree, String> {
    match kind {
        PlannerKind::Treedecomp => {
            let g = build_gaifman(p);
            let td = min_fill_decomposition(&g);
            decomposition_to_graded_tree(p, &td).map_err(|e| e.to_string())
        }
        PlannerKind::Bucket => {
            let mut order: Vec<VarId> = p.outputs().to_vec();
            order.sort();
            let mut xs: Vec<VarId> = p.inputs().to_vec();
            xs.sort();
            order.extend(xs);
            bucket_elimination_tree(p, &order).map_err(|e| e.to_string())
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), i32> {
    fs::write(path, contents).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_ERROR
    })
}

fn cmd_plan(file: &Path, planner: PlannerKind, dot: Option<PathBuf>, json: Option<PathBuf>) -> i32 {
    let p = match load_problem(file) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let tree = match plan_tree(&p, planner) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_INPUT;
        }
    };
    let width = tree_width(&p, &tree);
    let violations = validate_tree(&p, &tree);

    println!("instance: {}", instance_name(file));
    println!("planner: {}", planner.label());
    println!("nodes: {}", tree.len());
    println!("width: {width}");
    println!("valid: {}", violations.is_empty());
    for v in &violations {
        eprintln!("violation: {v}");
    }

    if let Some(path) = dot {
        if let Err(code) = write_file(&path, &tree_to_dot(&p, &tree)) {
            return code;
        }
    }
    if let Some(path) = json {
        let doc = serde_json::to_string_pretty(&tree_to_json(&tree)).expect("tree JSON");
        if let Err(code) = write_file(&path, &(doc + "\n")) {
            return code;
        }
    }
    if violations.is_empty() {
        EXIT_FULLY
    } else {
        EXIT_ERROR
    }
}

fn run_solve(
    p: &SynthesisProblem,
    instance: &str,
    planner: PlannerKind,
    engine: EngineKind,
    do_verify: bool,
    max_oracle_vars: usize,
) -> Result<SolveOutput, SolveFailure> {
    let internal = |e: &dyn std::fmt::Display| SolveFailure::Internal(e.to_string());
    let total = Instant::now();

    let graph = build_gaifman(p);
    let var_order = mcs_order(&graph);

    let (tree, planner_name, width, plan_ms) = match engine {
        EngineKind::Dpsynth => {
            let t0 = Instant::now();
            let tree = plan_tree(p, planner).map_err(SolveFailure::Plan)?;
            let plan_ms = t0.elapsed().as_millis();
            let width = tree_width(p, &tree);
            (Some(tree), Some(planner.label().to_string()), Some(width), Some(plan_ms))
        }
        EngineKind::Baseline => (None, None, None, None),
    };

    let mut m = BddManager::new(var_order);
    let t1 = Instant::now();
    for clause in p.clauses() {
        m.clause_to_bdd(clause).map_err(|e| internal(&e))?;
    }
    let compile_ms = t1.elapsed().as_millis();

    let (outcome, witnesses, realizability_ms, synthesis_ms) = match &tree {
        Some(tree) => {
            let t2 = Instant::now();
            let outcome = decide_realizability(&mut m, p, tree).map_err(|e| internal(&e))?;
            let realizability_ms = t2.elapsed().as_millis();
            let t3 = Instant::now();
            let witnesses = if outcome.verdict == Verdict::Nullary {
                None
            } else {
                Some(dp_synth(&mut m, p, tree, &outcome).map_err(|e| internal(&e))?)
            };
            (outcome, witnesses, realizability_ms, t3.elapsed().as_millis())
        }
        None => {
            // The factored chain decides and synthesizes in one pass;
            // its whole cost lands in the realizability column.
            let t2 = Instant::now();
            let file_order: Vec<usize> = (0..p.clauses().len()).collect();
            let (outcome, w) =
                factored_baseline(&mut m, p, &file_order).map_err(|e| internal(&e))?;
            let witnesses = (outcome.verdict != Verdict::Nullary).then_some(w);
            (outcome, witnesses, t2.elapsed().as_millis(), 0)
        }
    };

    let (verification, verification_failed) = match (&witnesses, do_verify) {
        (Some(w), true) => {
            let report = verify_witnesses(&mut m, p, outcome.realizability_set, w, max_oracle_vars)
                .map_err(|e| internal(&e))?;
            if report.ok {
                ("ok".to_string(), false)
            } else {
                eprintln!("verification failed on {instance}: {}", report.to_json());
                ("failed".to_string(), true)
            }
        }
        _ => ("skipped".to_string(), false),
    };

    let witnesses_json = match &witnesses {
        None => None,
        Some(w) => {
            let doc = witnesses_to_json(&m, p, w).map_err(|e| internal(&e))?;
            let text = serde_json::to_string_pretty(&doc).expect("witness JSON");
            Some(text + "\n")
        }
    };

    let stats = SolveStats {
        instance: instance.to_string(),
        engine: engine.label().to_string(),
        planner: planner_name,
        tree_width: width,
        plan_ms,
        compile_ms,
        realizability_ms,
        synthesis_ms,
        end_to_end_ms: total.elapsed().as_millis(),
        peak_nodes: m.peak_nodes(),
        verdict: outcome.verdict.to_string(),
        verification,
    };
    Ok(SolveOutput { stats, witnesses_json, verdict: outcome.verdict, verification_failed })
}

fn run_with_timeout<T: Send + 'static>(
    timeout: Option<u64>,
    job: impl FnOnce() -> T + Send + 'static,
) -> Option<T> {
    match timeout {
        None => Some(job()),
        Some(secs) => {
            let (tx, rx) = mpsc::channel();
            // A worker that overruns is abandoned; it dies with the
            // process (solve) or idles until the batch finishes (bench).
            thread::spawn(move || {
                let _ = tx.send(job());
            });
            rx.recv_timeout(Duration::from_secs(secs)).ok()
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    file: &Path,
    planner: PlannerKind,
    engine: EngineKind,
    witnesses: Option<PathBuf>,
    stats: Option<PathBuf>,
    verify: bool,
    max_oracle_vars: usize,
    timeout: Option<u64>,
) -> i32 {
    let p = match load_problem(file) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let instance = instance_name(file);
    let result = {
        let instance = instance.clone();
        run_with_timeout(timeout, move || {
            run_solve(&p, &instance, planner, engine, verify, max_oracle_vars)
        })
    };
    let result = match result {
        Some(r) => r,
        None => {
            eprintln!("timeout: {instance} exceeded {}s", timeout.unwrap_or(0));
            return EXIT_TIMEOUT;
        }
    };
    let out = match result {
        Ok(out) => out,
        Err(SolveFailure::Plan(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_INPUT;
        }
        Err(SolveFailure::Internal(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_ERROR;
        }
    };

    if let (Some(path), Some(json)) = (&witnesses, &out.witnesses_json) {
        if let Err(code) = write_file(path, json) {
            return code;
        }
    }
    if let Some(path) = &stats {
        let doc = serde_json::to_string_pretty(&out.stats).expect("stats JSON");
        if let Err(code) = write_file(path, &(doc + "\n")) {
            return code;
        }
    }

    println!("instance: {instance}");
    println!("engine: {}", out.stats.engine);
    if let Some(w) = out.stats.tree_width {
        println!("width: {w}");
    }
    println!("verdict: {}", out.stats.verdict);
    println!("verification: {}", out.stats.verification);
    println!("peak_nodes: {}", out.stats.peak_nodes);
    println!("end_to_end_ms: {}", out.stats.end_to_end_ms);

    if out.verification_failed {
        return EXIT_ERROR;
    }
    match out.verdict {
        Verdict::Fully => EXIT_FULLY,
        Verdict::Partially => EXIT_PARTIALLY,
        Verdict::Nullary => EXIT_NULLARY,
    }
}

const ENGINE_COLUMNS: [&str; 9] = [
    "verdict",
    "tree_width",
    "plan_ms",
    "compile_ms",
    "realizability_ms",
    "synthesis_ms",
    "end_to_end_ms",
    "peak_nodes",
    "verification",
];

fn csv_cell(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn stats_cells(stats: &SolveStats) -> Vec<String> {
    let opt_num = |v: &Option<u128>| v.map(|x| x.to_string()).unwrap_or_default();
    vec![
        stats.verdict.clone(),
        stats.tree_width.map(|w| w.to_string()).unwrap_or_default(),
        opt_num(&stats.plan_ms),
        stats.compile_ms.to_string(),
        stats.realizability_ms.to_string(),
        stats.synthesis_ms.to_string(),
        stats.end_to_end_ms.to_string(),
        stats.peak_nodes.to_string(),
        stats.verification.clone(),
    ]
}

fn marker_cells(marker: &str) -> Vec<String> {
    let mut cells = vec![marker.to_string()];
    cells.extend(std::iter::repeat_with(String::new).take(ENGINE_COLUMNS.len() - 1));
    cells
}

fn cmd_bench(
    dir: &Path,
    engines: EngineSelection,
    timeout: Option<u64>,
    csv: Option<PathBuf>,
) -> i32 {
    let entries = match fs::read_dir(dir) {
        Ok(it) => it,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", dir.display());
            return EXIT_INPUT;
        }
    };
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "qdimacs"))
        .collect();
    files.sort();

    let selected = engines.engines();
    let mut table = String::new();
    let mut header = vec!["instance".to_string()];
    for engine in &selected {
        for col in ENGINE_COLUMNS {
            header.push(format!("{}_{}", engine.label(), col));
        }
    }
    let _ = writeln!(table, "{}", header.join(","));

    for file in &files {
        let instance = instance_name(file);
        let mut row = vec![csv_cell(&instance)];
        let parsed = fs::read_to_string(file)
            .map_err(|e| e.to_string())
            .and_then(|text| parse_qdimacs(&text).map_err(|e| e.to_string()));
        for &engine in &selected {
            let cells = match &parsed {
                Err(msg) => {
                    eprintln!("{instance} [{}]: parse error: {msg}", engine.label());
                    marker_cells("error")
                }
                Ok(p) => {
                    let p = p.clone();
                    let inst = instance.clone();
                    let outcome = run_with_timeout(timeout, move || {
                        run_solve(
                            &p,
                            &inst,
                            PlannerKind::Treedecomp,
                            engine,
                            true,
                            DEFAULT_ORACLE_BOUND,
                        )
                    });
                    match outcome {
                        None => {
                            println!("{instance} [{}]: timeout", engine.label());
                            marker_cells("timeout")
                        }
                        Some(Err(SolveFailure::Plan(msg)))
                        | Some(Err(SolveFailure::Internal(msg))) => {
                            eprintln!("{instance} [{}]: error: {msg}", engine.label());
                            marker_cells("error")
                        }
                        Some(Ok(out)) => {
                            println!(
                                "{instance} [{}]: {} in {} ms",
                                engine.label(),
                                out.stats.verdict,
                                out.stats.end_to_end_ms
                            );
                            stats_cells(&out.stats)
                        }
                    }
                }
            };
            row.extend(cells.iter().map(|c| csv_cell(c)));
        }
        let _ = writeln!(table, "{}", row.join(","));
    }

    match csv {
        Some(path) => {
            if let Err(code) = write_file(&path, &table) {
                return code;
            }
        }
        None => print!("{table}"),
    }
    EXIT_FULLY
}
