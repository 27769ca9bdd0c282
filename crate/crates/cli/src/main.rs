//! `ramopt`: run solver experiments, generate instance headers and run the
//! verification suites.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use ramopt_core::harness::{
    emit_outputs, run_experiment, ExperimentSummary, InstanceHeader, OutputPaths, ProblemKind, RunOptions, ScaleMode,
    SolverKind, SUMMARY_HEADER,
};
use ramopt_core::solver::Status;
use ramopt_core::verify::{all_ok, format_table, run_suite, to_json, Suite};
use ramopt_core::Error;

#[derive(Debug, Parser)]
#[command(name = "ramopt", version, about = "Riemannian Anderson mixing experiments")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run repeated seeded trials of one solver on one problem family.
    Run(RunArgs),
    /// Run the numerical verification suites.
    Verify(VerifyArgs),
    /// Write the JSON header that regenerates a problem instance.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// maxcut, brockett, karcher or matcomp.
    #[arg(long)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    n: Option<usize>,
    /// Columns (maxcut, brockett).
    #[arg(long)]
    p: Option<usize>,
    /// Rank (matcomp).
    #[arg(long)]
    k: Option<usize>,
    /// Matrix count (karcher) or column count (matcomp).
    #[arg(long = "m-count")]
    m_count: Option<usize>,
    /// Max-cut edge threshold.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// key=value file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    /// ram, rram, rgd, rlbfgs or fixedpoint.
    #[arg(long)]
    solver: Option<SolverKind>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    memory: Option<usize>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Seed base; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "warm-start", conflicts_with = "no_warm_start")]
    warm_start: bool,
    #[arg(long = "no-warm-start")]
    no_warm_start: bool,
    /// auto, none or a positive number.
    #[arg(long)]
    scale: Option<ScaleMode>,
    /// Directory for summary.csv, trials.jsonl and traces/.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// geometry, gradients, oracle or all.
    #[arg(long, default_value = "all")]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the reports as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) => Failure::Usage(e.into()),
            _ => Failure::Runtime(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl ProblemArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            problem: self.problem,
            n: self.n,
            p: self.p,
            k: self.k,
            m_count: self.m_count,
            tau: self.tau,
            ..RunOptions::default()
        }
    }
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        let warm_start = match (self.warm_start, self.no_warm_start) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        };
        RunOptions {
            solver: self.solver,
            beta: self.beta,
            memory: self.memory,
            max_iter: self.max_iter,
            tol: self.tol,
            trials: self.trials,
            seed: self.seed,
            warm_start,
            scale: self.scale,
            out: self.out.clone(),
            ..self.problem.options()
        }
    }
}

fn print_summary(s: &ExperimentSummary) {
    println!("trial  status          iters  warm  grad_unscaled  f                 time_s");
    for r in s.records() {
        println!(
            "{:>5}  {:<14}  {:>5}  {:>4}  {:>13.3e}  {:>16.9e}  {:.3}",
            r.trial,
            r.status.as_str(),
            r.iterations,
            r.warm_iterations,
            r.grad_unscaled,
            r.f,
            r.elapsed_s
        );
        if let Some(m) = &r.message {
            println!("       {m}");
        }
    }
    println!("{SUMMARY_HEADER}");
    println!(
        "{},{},{},{},{},{:e},{:e},{}",
        s.problem, s.dims, s.solver, s.trials, s.rate, s.grad_gm, s.time_gm_s, s.seed_base
    );
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let mut opts = args.options();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(Failure::Usage)?;
        let file = RunOptions::from_kv(&text)
            .with_context(|| format!("in config {}", path.display()))
            .map_err(Failure::Usage)?;
        opts = opts.or(file);
    }
    let cfg = opts.to_config()?;
    log::info!(
        "{} {} x{} trials, seed base {}",
        cfg.solver,
        cfg.problem.kind,
        cfg.trials,
        cfg.seed_base
    );
    let summary = run_experiment(&cfg)?;
    print_summary(&summary);
    if let Some(dir) = &opts.out {
        emit_outputs(&summary, &OutputPaths::in_dir(dir))?;
        log::info!("wrote results to {}", dir.display());
    }
    let failed = summary.records().filter(|r| r.status == Status::NumericalError).count();
    if failed > 0 {
        log::warn!("{failed} trial(s) ended with a numerical error");
    }
    Ok(())
}

fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let reports = run_suite(args.suite, args.seed)?;
    print!("{}", format_table(&reports));
    if let Some(path) = &args.json {
        std::fs::write(path, to_json(&reports)?).with_context(|| format!("writing {}", path.display()))?;
    }
    if all_ok(&reports) {
        Ok(())
    } else {
        let bad: Vec<&str> = reports.iter().filter(|r| !r.ok()).map(|r| r.probe.as_str()).collect();
        Err(Failure::Runtime(anyhow::anyhow!("probes failed: {}", bad.join(", "))))
    }
}

fn gen(args: &GenArgs) -> Result<(), Failure> {
    let spec = args.problem.options().problem_spec()?;
    let json = InstanceHeader::new(&spec, args.seed)?.to_json()?;
    match &args.out {
        Some(path) => std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Gen(a) => gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
