//! Command-line front end: benchmark generation, CNF encoding, sequential
//! and parallel solving, partition auditing, and model checking.
//!
//! Exit codes follow the SAT-competition convention for the solving
//! commands: 10 = satisfiable, 20 = unsatisfiable, 30 = undetermined
//! (plain `solve` only).

use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use intervalsat::aiger::{parse_aiger, serialize_aiger};
use intervalsat::dimacs::{parse_dimacs, write_dimacs_with_meta, CnfMeta, DimacsDoc};
use intervalsat::interval::{split_equal, verify_complete_system, Interval};
use intervalsat::orchestrator::{
    run_worker, solve_parallel_inproc, tcp_master_session, run_master, MasterConfig, Mode,
    RunOutcome, TcpWorkerTransport, WorkerConfig,
};
use intervalsat::{
    circuitsat_cnf, gen_sorter, initial_partition, lec_cnf, solve_dfs, Assignment, Budget, Circuit,
    DecompStats, DfsConfig, FinalVerdict, InputVector, Lit, SortAlgorithm, Solver, Var, Verdict,
};

const EXIT_SAT: u8 = 10;
const EXIT_UNSAT: u8 = 20;
const EXIT_INDET: u8 = 30;

#[derive(Parser)]
#[command(name = "intervalsat", version, about = "Interval-decomposition CircuitSAT toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Bubble,
    Selection,
    Pancake,
}

impl From<AlgorithmArg> for SortAlgorithm {
    fn from(a: AlgorithmArg) -> SortAlgorithm {
        match a {
            AlgorithmArg::Bubble => SortAlgorithm::Bubble,
            AlgorithmArg::Selection => SortAlgorithm::Selection,
            AlgorithmArg::Pancake => SortAlgorithm::Pancake,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodeMode {
    Circuitsat,
    Lec,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    FirstSat,
    Exhaust,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::FirstSat => Mode::FirstSat,
            ModeArg::Exhaust => Mode::Exhaust,
        }
    }
}

#[derive(Args)]
struct DecompArgs {
    /// Size of the initial interval partition.
    #[arg(long, default_value_t = 16)]
    q: u64,
    /// Splitting factor for undetermined intervals.
    #[arg(long, default_value_t = 2)]
    d: u64,
    /// Conflict budget per task (0 = unlimited).
    #[arg(long, default_value_t = 1000)]
    t: u64,
    /// Seed for solver tie-breaking.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write a machine-readable stats summary to this path.
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sorting benchmark circuit as ASCII AIGER.
    Gen {
        algorithm: AlgorithmArg,
        /// Number of words to sort.
        k: u64,
        /// Bits per word.
        l: u64,
        /// Output file (stdout if omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Encode circuits into DIMACS CNF with variable-map meta comments.
    Encode {
        /// circuitsat takes one single-output circuit; lec takes two
        /// circuits of equal arity.
        mode: EncodeMode,
        /// AIGER input file(s).
        inputs: Vec<PathBuf>,
        /// Output file (stdout if omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Solve a DIMACS formula with one budgeted solver run.
    Solve {
        dimacs: PathBuf,
        /// Conflict budget (0 = unlimited).
        #[arg(long, default_value_t = 0)]
        t: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Wall-clock safety cap in seconds; hitting it reports
        /// undetermined, distinctly from conflict-budget exhaustion.
        #[arg(long)]
        max_seconds: Option<f64>,
    },
    /// Depth-first interval decomposition in a single thread.
    SolveDfs {
        dimacs: PathBuf,
        #[command(flatten)]
        decomp: DecompArgs,
    },
    /// Master/worker parallel interval decomposition.
    SolvePar {
        dimacs: PathBuf,
        #[command(flatten)]
        decomp: DecompArgs,
        /// Worker count: in-process threads, or connections to await with
        /// --listen.
        #[arg(long, default_value_t = 4)]
        workers: u32,
        #[arg(long, value_enum, default_value = "first-sat")]
        mode: ModeArg,
        /// Clamp on the adaptive split fan-out.
        #[arg(long, default_value_t = 1 << 16)]
        cap: u64,
        /// Listen address for TCP workers (in-process threads if omitted).
        #[arg(long)]
        listen: Option<String>,
        /// Fail on worker disconnect instead of re-queueing its task.
        #[arg(long)]
        no_requeue: bool,
        /// Verify queue discipline and interval conservation while running.
        #[arg(long, hide = true)]
        audit: bool,
    },
    /// Join a running master as a worker.
    Worker {
        /// Master address, e.g. 127.0.0.1:7400.
        #[arg(long)]
        connect: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Randomized audit of the interval partition/split operations.
    VerifyPartition {
        /// Hypercube bit width.
        #[arg(long, default_value_t = 16)]
        n: usize,
        /// Initial partition size to audit.
        #[arg(long, default_value_t = 64)]
        q: u64,
        /// Largest splitting factor to try.
        #[arg(long, default_value_t = 8)]
        d: u64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Test hook: audit a deliberately overlapping system.
        #[arg(long, hide = true)]
        inject_overlap: bool,
    },
    /// Check a model file against a DIMACS formula.
    #[command(hide = true)]
    CheckModel { dimacs: PathBuf, model: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> Result<u8> {
    match Cli::parse().command {
        Command::Gen {
            algorithm,
            k,
            l,
            out,
        } => cmd_gen(algorithm.into(), k, l, out),
        Command::Encode { mode, inputs, out } => cmd_encode(mode, &inputs, out),
        Command::Solve {
            dimacs,
            t,
            seed,
            max_seconds,
        } => cmd_solve(&dimacs, t, seed, max_seconds),
        Command::SolveDfs { dimacs, decomp } => cmd_solve_dfs(&dimacs, &decomp),
        Command::SolvePar {
            dimacs,
            decomp,
            workers,
            mode,
            cap,
            listen,
            no_requeue,
            audit,
        } => cmd_solve_par(
            &dimacs,
            &decomp,
            workers,
            mode.into(),
            cap,
            listen.as_deref(),
            no_requeue,
            audit,
        ),
        Command::Worker { connect, seed } => cmd_worker(&connect, seed),
        Command::VerifyPartition {
            n,
            q,
            d,
            trials,
            seed,
            inject_overlap,
        } => cmd_verify_partition(n, q, d, trials, seed, inject_overlap),
        Command::CheckModel { dimacs, model } => cmd_check_model(&dimacs, &model),
    }
}

fn write_output(out: Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_gen(algorithm: SortAlgorithm, k: u64, l: u64, out: Option<PathBuf>) -> Result<u8> {
    let circuit = gen_sorter(algorithm, k, l)?;
    write_output(out, &serialize_aiger(&circuit))?;
    Ok(0)
}

fn load_circuit(path: &PathBuf) -> Result<Circuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_aiger(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_encode(mode: EncodeMode, inputs: &[PathBuf], out: Option<PathBuf>) -> Result<u8> {
    let (cnf, map) = match mode {
        EncodeMode::Circuitsat => {
            let [path] = inputs else {
                bail!("circuitsat encoding takes exactly one circuit");
            };
            circuitsat_cnf(&load_circuit(path)?)?
        }
        EncodeMode::Lec => {
            let [a, b] = inputs else {
                bail!("lec encoding takes exactly two circuits");
            };
            lec_cnf(&load_circuit(a)?, &load_circuit(b)?)?
        }
    };
    write_output(out, &write_dimacs_with_meta(&cnf, &CnfMeta::from(&map)))?;
    Ok(0)
}

fn load_dimacs(path: &PathBuf) -> Result<DimacsDoc> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dimacs(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Inputs of a decomposition run must be the canonical variables `1..=n`.
fn decomposition_inputs(doc: &DimacsDoc, path: &PathBuf) -> Result<usize> {
    let meta = doc.meta.as_ref().ok_or_else(|| {
        anyhow!(
            "{} carries no 'c meta inputs' line; decomposition needs to know the input variables",
            path.display()
        )
    })?;
    if !meta.inputs_are_canonical() {
        bail!(
            "{}: input variables must be 1..n for interval decomposition",
            path.display()
        );
    }
    if meta.input_vars.is_empty() {
        bail!("{}: empty input variable list", path.display());
    }
    Ok(meta.input_vars.len())
}

fn print_model(model: &Assignment) {
    let lits: Vec<String> = model
        .iter_assigned()
        .map(|(v, b)| Lit::new(v, b).to_string())
        .collect();
    for chunk in lits.chunks(20) {
        println!("v {}", chunk.join(" "));
    }
    println!("v 0");
}

fn cmd_solve(path: &PathBuf, t: u64, seed: u64, max_seconds: Option<f64>) -> Result<u8> {
    let doc = load_dimacs(path)?;
    let budget = Budget::conflicts(t);
    let verdict = match max_seconds {
        None => {
            let mut solver = Solver::with_seed(&doc.cnf, seed);
            let v = solver.solve(budget);
            println!("c conflicts {}", solver.conflicts());
            v
        }
        Some(limit) => {
            // Wall-clock safety net: run the solver on a helper thread and
            // give up distinctly if the cap elapses first.
            let cnf = doc.cnf.clone();
            let (tx, rx) = std::sync::mpsc::channel();
            std::thread::spawn(move || {
                let mut solver = Solver::with_seed(&cnf, seed);
                let v = solver.solve(budget);
                let _ = tx.send((v, solver.conflicts()));
            });
            match rx.recv_timeout(Duration::from_secs_f64(limit)) {
                Ok((v, conflicts)) => {
                    println!("c conflicts {conflicts}");
                    v
                }
                Err(_) => {
                    println!("c wall-clock limit of {limit} s reached");
                    println!("s UNKNOWN");
                    return Ok(EXIT_INDET);
                }
            }
        }
    };
    match verdict {
        Verdict::Sat(model) => {
            println!("s SATISFIABLE");
            print_model(&model);
            Ok(EXIT_SAT)
        }
        Verdict::Unsat => {
            println!("s UNSATISFIABLE");
            Ok(EXIT_UNSAT)
        }
        Verdict::Indet => {
            println!("c conflict budget of {t} exhausted");
            println!("s UNKNOWN");
            Ok(EXIT_INDET)
        }
    }
}

fn stats_json(
    instance: &PathBuf,
    command: &str,
    q: u64,
    d: u64,
    t: u64,
    workers: Option<u32>,
    mode: Option<&str>,
    verdict: &str,
    stats: &DecompStats,
) -> serde_json::Value {
    serde_json::json!({
        "instance": instance.display().to_string(),
        "command": command,
        "q": q,
        "d": d,
        "t": t,
        "workers": workers,
        "mode": mode,
        "verdict": verdict,
        "indet_count": stats.indet_count,
        "sat_count": stats.sat_count,
        "unsat_count": stats.unsat_count,
        "subsolver_calls": stats.subsolver_calls,
        "max_level": stats.max_level_reached,
        "total_conflicts": stats.total_conflicts,
        "wall_seconds": stats.wall_time.as_secs_f64(),
        "busy_seconds": stats.busy_time.as_secs_f64(),
    })
}

fn emit_stats(stats_out: &Option<PathBuf>, doc: &serde_json::Value) -> Result<()> {
    println!("c stats {doc}");
    if let Some(path) = stats_out {
        let mut file =
            fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        writeln!(file, "{}", serde_json::to_string_pretty(doc)?)?;
    }
    Ok(())
}

fn cmd_solve_dfs(path: &PathBuf, args: &DecompArgs) -> Result<u8> {
    let doc = load_dimacs(path)?;
    let n = decomposition_inputs(&doc, path)?;
    let cfg = DfsConfig {
        q: args.q,
        d: args.d,
        budget: Budget::conflicts(args.t),
        seed: args.seed,
    };
    let (verdict, stats) = solve_dfs(&doc.cnf, n, &cfg)?;
    let verdict_name = if verdict.is_sat() { "SAT" } else { "UNSAT" };
    emit_stats(
        &args.stats_out,
        &stats_json(
            path, "solve-dfs", args.q, args.d, args.t, None, None, verdict_name, &stats,
        ),
    )?;
    match verdict {
        FinalVerdict::Sat(model) => {
            println!("s SATISFIABLE");
            print_model(&model);
            Ok(EXIT_SAT)
        }
        FinalVerdict::Unsat => {
            println!("s UNSATISFIABLE");
            Ok(EXIT_UNSAT)
        }
    }
}

fn print_input_models(models: &[InputVector]) {
    println!("c solutions {}", models.len());
    for model in models {
        let lits: Vec<String> = model
            .bits()
            .iter()
            .enumerate()
            .map(|(i, &b)| Lit::new(Var(i as u32 + 1), b).to_string())
            .collect();
        println!("v {} 0", lits.join(" "));
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve_par(
    path: &PathBuf,
    args: &DecompArgs,
    workers: u32,
    mode: Mode,
    cap: u64,
    listen: Option<&str>,
    no_requeue: bool,
    audit: bool,
) -> Result<u8> {
    let doc = load_dimacs(path)?;
    let n = decomposition_inputs(&doc, path)?;
    let cfg = MasterConfig {
        q: args.q,
        d: args.d,
        budget: Budget::conflicts(args.t),
        mode,
        split_cap: cap,
        requeue_on_disconnect: !no_requeue,
        audit,
        shuffle_seed: None,
    };
    let (outcome, stats) = match listen {
        None => solve_parallel_inproc(
            &doc.cnf,
            n,
            workers,
            &cfg,
            &WorkerConfig { seed: args.seed },
        )?,
        Some(addr) => {
            let listener =
                TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            println!("c listening on {}", listener.local_addr()?);
            println!("c waiting for {workers} workers");
            let (hooks, _readers) = tcp_master_session(listener, workers)?;
            run_master(&doc.cnf, n, hooks, &cfg)?
        }
    };
    let verdict_name = match &outcome {
        RunOutcome::Sat { .. } => "SAT",
        RunOutcome::Unsat => "UNSAT",
        RunOutcome::Exhausted { input_models } if input_models.is_empty() => "UNSAT",
        RunOutcome::Exhausted { .. } => "SAT",
    };
    let mode_name = match mode {
        Mode::FirstSat => "first-sat",
        Mode::Exhaust => "exhaust",
    };
    emit_stats(
        &args.stats_out,
        &stats_json(
            path,
            "solve-par",
            args.q,
            args.d,
            args.t,
            Some(workers),
            Some(mode_name),
            verdict_name,
            &stats,
        ),
    )?;
    match outcome {
        RunOutcome::Sat { model } => {
            println!("s SATISFIABLE");
            print_model(&model);
            Ok(EXIT_SAT)
        }
        RunOutcome::Unsat => {
            println!("s UNSATISFIABLE");
            Ok(EXIT_UNSAT)
        }
        RunOutcome::Exhausted { input_models } => {
            if input_models.is_empty() {
                println!("s UNSATISFIABLE");
                Ok(EXIT_UNSAT)
            } else {
                println!("s SATISFIABLE");
                print_input_models(&input_models);
                Ok(EXIT_SAT)
            }
        }
    }
}

fn cmd_worker(connect: &str, seed: u64) -> Result<u8> {
    // The master may come up a moment later; retry briefly.
    let mut attempt = 0;
    let transport = loop {
        match TcpWorkerTransport::connect(connect) {
            Ok(t) => break t,
            Err(e) if attempt < 20 => {
                attempt += 1;
                log::info!("connect to {connect} failed ({e}), retrying");
                std::thread::sleep(Duration::from_millis(250));
            }
            Err(e) => return Err(e).with_context(|| format!("connecting to {connect}")),
        }
    };
    run_worker(transport, &WorkerConfig { seed })?;
    println!("c worker finished");
    Ok(0)
}

/// Uniform-enough sampling for audit purposes: wide random bytes reduced
/// modulo the bound.
fn random_biguint_below(rng: &mut ChaCha8Rng, bound: &BigUint) -> BigUint {
    let bytes = (bound.bits() as usize).div_ceil(8) + 8;
    let mut buf = vec![0u8; bytes];
    rng.fill_bytes(&mut buf);
    BigUint::from_bytes_le(&buf) % bound
}

fn cmd_verify_partition(
    n: usize,
    q: u64,
    d: u64,
    trials: u64,
    seed: u64,
    inject_overlap: bool,
) -> Result<u8> {
    if inject_overlap {
        let broken = vec![Interval::from_u64(0, 3), Interval::from_u64(2, 8)];
        let check = verify_complete_system(&broken, &Interval::from_u64(0, 8));
        for v in &check.violations {
            println!("violation: {v}");
        }
        return Ok(if check.ok { 0 } else { 1 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = Interval::full(n);
    let mut checks = 0u64;
    let mut violations = 0u64;

    let sys = initial_partition(n, q)?;
    let check = verify_complete_system(sys.intervals(), &full);
    checks += 1;
    if !check.ok {
        violations += check.violations.len() as u64;
        for v in &check.violations {
            println!("initial partition violation: {v}");
        }
    }

    for _ in 0..trials {
        // Random interval of length >= 2 inside the hypercube.
        let lo = random_biguint_below(&mut rng, &(full.hi() - BigUint::from(1u32)));
        let slack = full.hi() - &lo - BigUint::from(1u32);
        let extra = random_biguint_below(&mut rng, &slack);
        let hi = &lo + BigUint::from(2u32) + extra;
        debug_assert!(hi <= *full.hi());
        let parent = Interval::new(lo, hi).expect("non-empty by construction");
        let factor = rng.gen_range(2..=d.max(2));
        let sys = split_equal(&parent, factor)?;
        let check = verify_complete_system(sys.intervals(), &parent);
        checks += 1;
        if !check.ok {
            violations += check.violations.len() as u64;
            for v in &check.violations {
                println!("split violation on {parent} d={factor}: {v}");
            }
        }
    }

    println!("ok: {checks} checks, {violations} violations");
    Ok(if violations == 0 { 0 } else { 1 })
}

fn cmd_check_model(dimacs: &PathBuf, model_path: &PathBuf) -> Result<u8> {
    let doc = load_dimacs(dimacs)?;
    let text = fs::read_to_string(model_path)
        .with_context(|| format!("reading {}", model_path.display()))?;
    let mut assignment = Assignment::empty(doc.cnf.num_vars());
    for line in text.lines() {
        let line = line.trim();
        let body = match line.strip_prefix("v ") {
            Some(body) => body,
            None if line.starts_with('v') => line.trim_start_matches('v'),
            None if line.starts_with('s') || line.starts_with('c') => continue,
            None => line,
        };
        for tok in body.split_whitespace() {
            let value: i64 = tok
                .parse()
                .map_err(|_| anyhow!("bad literal '{tok}' in model file"))?;
            if value == 0 {
                continue;
            }
            if value.unsigned_abs() > doc.cnf.num_vars() as u64 {
                bail!("literal {value} out of range for the formula");
            }
            assignment.set(Var(value.unsigned_abs() as u32), value > 0);
        }
    }
    if doc.cnf.is_satisfied_by(&assignment) {
        println!("MODEL OK");
        Ok(0)
    } else {
        println!("MODEL FAILED");
        Ok(1)
    }
}
