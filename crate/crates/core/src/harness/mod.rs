//! Experiment runner: repeated seeded trials of one solver on one problem
//! family, with optional warm start, and summary metrics.

mod instance;
mod options;
mod output;

pub use instance::{brockett_check, matcomp_relative_residual, BrockettCheck, Instance, InstanceHeader, ProblemKind};
pub use options::{parse_kv, RunOptions};
pub use output::{emit_outputs, read_records, OutputPaths, SUMMARY_HEADER, TRACE_HEADER};

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{run_fixed_point, run_rgd, run_rlbfgs, DescentConfig, FixedPointConfig};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, PointOf};
use crate::mixing::{run_mixing, AlphaMode, DeltaMode, MixingConfig, Variant};
use crate::parallel::map_jobs;
use crate::problems::ProblemInstance;
use crate::solver::{SolverReport, Status, StopMeasure, TraceRow};

/// Offset separating the initial-point stream from the instance stream.
pub const INIT_SEED_OFFSET: u64 = 1 << 63;

/// Problem family and size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: usize,
    /// Columns (max-cut, Brockett).
    pub p: usize,
    /// Rank (matrix completion).
    pub k: usize,
    /// Matrix count (Karcher) or column count (matrix completion).
    pub m: usize,
    /// Max-cut edge threshold.
    pub tau: f64,
}

impl ProblemSpec {
    /// Desk-scale defaults.
    pub fn default_for(kind: ProblemKind) -> Self {
        let base = ProblemSpec {
            kind,
            n: 200,
            p: 10,
            k: 5,
            m: 5,
            tau: 0.3,
        };
        match kind {
            ProblemKind::Maxcut => base,
            ProblemKind::Brockett => ProblemSpec { p: 5, ..base },
            ProblemKind::Karcher => ProblemSpec { n: 30, ..base },
            ProblemKind::Matcomp => ProblemSpec { m: 200, ..base },
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match self.kind {
            ProblemKind::Maxcut | ProblemKind::Brockett => vec![self.n, self.p],
            ProblemKind::Karcher => vec![self.n, self.m],
            ProblemKind::Matcomp => vec![self.n, self.m, self.k],
        }
    }

    pub fn dims_label(&self) -> String {
        self.dims().iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("{}: {m}", self.kind)));
        match self.kind {
            ProblemKind::Maxcut if self.n < 2 || self.p == 0 => bad("needs n >= 2 and p >= 1"),
            ProblemKind::Maxcut if !(0.0..=1.0).contains(&self.tau) => bad("tau must lie in [0, 1]"),
            ProblemKind::Brockett if self.p == 0 || self.p > self.n => bad("needs 1 <= p <= n"),
            ProblemKind::Karcher if self.n == 0 || self.m == 0 => bad("needs n, m >= 1"),
            ProblemKind::Matcomp if self.k == 0 || self.k > self.n.min(self.m) => bad("needs 1 <= k <= min(n, m)"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Ram,
    Rram,
    Rgd,
    Rlbfgs,
    Fixedpoint,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::Ram,
        SolverKind::Rram,
        SolverKind::Rgd,
        SolverKind::Rlbfgs,
        SolverKind::Fixedpoint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Ram => "ram",
            SolverKind::Rram => "rram",
            SolverKind::Rgd => "rgd",
            SolverKind::Rlbfgs => "rlbfgs",
            SolverKind::Fixedpoint => "fixedpoint",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown solver '{s}'")))
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How `λ` in `r = −λ grad f` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// `1/max(dims)`.
    Auto,
    /// `λ = 1`.
    None,
    Fixed(f64),
}

impl std::str::FromStr for ScaleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ScaleMode::Auto),
            "none" => Ok(ScaleMode::None),
            _ => match s.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(ScaleMode::Fixed(v)),
                _ => Err(Error::InvalidInput(format!("scale must be auto, none or a positive number, got '{s}'"))),
            },
        }
    }
}

impl ScaleMode {
    pub fn resolve(self, max_dim: usize) -> f64 {
        match self {
            ScaleMode::Auto => 1.0 / max_dim.max(1) as f64,
            ScaleMode::None => 1.0,
            ScaleMode::Fixed(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub solver: SolverKind,
    pub trials: usize,
    pub seed_base: u64,
    pub beta: f64,
    pub memory: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub warm_start: bool,
    pub warm_tol: f64,
    pub warm_max_iter: usize,
    pub scale: ScaleMode,
    pub alpha_mode: AlphaMode,
    pub delta_mode: DeltaMode,
}

impl ExperimentConfig {
    /// Defaults for `solver` on `problem`: memory 1 and 150 iterations for
    /// max-cut, memory `p + 1` and 1500 iterations for Brockett, memory 3 and
    /// 1000 iterations otherwise; warm start for RAM only.
    pub fn new(problem: ProblemSpec, solver: SolverKind) -> Self {
        let (memory, max_iter) = match problem.kind {
            ProblemKind::Maxcut => (1, 150),
            ProblemKind::Brockett => (problem.p + 1, 1500),
            _ => (3, 1000),
        };
        ExperimentConfig {
            problem,
            solver,
            trials: 10,
            seed_base: 0,
            beta: 0.6,
            memory,
            max_iter,
            tol: 1e-6,
            warm_start: solver == SolverKind::Ram,
            warm_tol: 1e-2,
            warm_max_iter: 100,
            scale: ScaleMode::Auto,
            alpha_mode: AlphaMode::DescentCheck,
            delta_mode: DeltaMode::Adaptive { c1: 1e-7 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be >= 1".into()));
        }
        if !(self.warm_tol > 0.0) {
            return Err(Error::InvalidInput("warm-start tolerance must be > 0".into()));
        }
        self.mixing_config(1.0).validate()?;
        self.descent_config(1.0).line_search.validate()
    }

    pub fn mixing_config(&self, scale: f64) -> MixingConfig {
        MixingConfig {
            variant: if self.solver == SolverKind::Rram { Variant::Rram } else { Variant::Ram },
            beta: self.beta,
            memory: self.memory,
            alpha_mode: self.alpha_mode,
            delta_mode: self.delta_mode,
            max_iter: self.max_iter,
            tol: self.tol,
            scale,
            ..MixingConfig::default()
        }
    }

    pub fn descent_config(&self, scale: f64) -> DescentConfig {
        DescentConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            scale,
            ..DescentConfig::default()
        }
    }

    pub fn fixed_point_config(&self, scale: f64) -> FixedPointConfig {
        FixedPointConfig {
            scale,
            max_iter: self.max_iter,
            tol: self.tol,
            ..FixedPointConfig::default()
        }
    }

    pub fn instance_seed(&self, trial: usize) -> u64 {
        self.seed_base.wrapping_add(trial as u64)
    }

    pub fn init_seed(&self, trial: usize) -> u64 {
        self.instance_seed(trial).wrapping_add(INIT_SEED_OFFSET)
    }
}

/// Outcome of one trial, as written to the JSON-lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub instance_seed: u64,
    pub init_seed: u64,
    pub status: Status,
    pub iterations: usize,
    pub warm_iterations: usize,
    pub grad_unscaled: f64,
    pub r_norm: f64,
    pub f: f64,
    pub scale: f64,
    /// Wall-clock seconds including the warm start.
    pub elapsed_s: f64,
    pub warm_elapsed_s: f64,
    /// θ_k ≤ 1 + 1e-12 held at every iteration.
    pub theta_ok: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub problem: String,
    pub dims: String,
    pub solver: String,
    pub trials: usize,
    pub seed_base: u64,
    pub rate: f64,
    pub grad_gm: f64,
    pub time_gm_s: f64,
    pub outcomes: Vec<TrialOutcome>,
}

impl ExperimentSummary {
    pub fn records(&self) -> impl Iterator<Item = &TrialRecord> {
        self.outcomes.iter().map(|o| &o.record)
    }

    pub fn converged(&self) -> usize {
        self.records().filter(|r| r.status == Status::Converged).count()
    }
}

/// `exp(mean(log max(v, 1e-300)))`.
pub fn geometric_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v.max(1e-300).ln(), n + 1));
    if n == 0 {
        f64::NAN
    } else {
        (sum / n as f64).exp()
    }
}

/// `(rate, grad_gm, time_gm_s)` over a set of records.
pub fn aggregate(records: &[TrialRecord]) -> (f64, f64, f64) {
    let conv = records.iter().filter(|r| r.status == Status::Converged).count();
    (
        conv as f64 / records.len().max(1) as f64,
        geometric_mean(records.iter().map(|r| r.grad_unscaled)),
        geometric_mean(records.iter().map(|r| r.elapsed_s)),
    )
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    if cfg.warm_start && cfg.solver == SolverKind::Rram {
        log::warn!("warm start requested for RRAM; honoring the explicit flag");
    }
    let outcomes: Vec<Result<TrialOutcome>> = map_jobs(cfg.trials, |i| run_trial(cfg, i));
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let records: Vec<TrialRecord> = outcomes.iter().map(|o| o.record.clone()).collect();
    let (rate, grad_gm, time_gm_s) = aggregate(&records);
    Ok(ExperimentSummary {
        problem: cfg.problem.kind.to_string(),
        dims: cfg.problem.dims_label(),
        solver: cfg.solver.to_string(),
        trials: cfg.trials,
        seed_base: cfg.seed_base,
        rate,
        grad_gm,
        time_gm_s,
        outcomes,
    })
}

/// Run trial `i` of `cfg`. Instance generation failures are errors; solver
/// failures are recorded in the outcome.
pub fn run_trial(cfg: &ExperimentConfig, i: usize) -> Result<TrialOutcome> {
    let seed = cfg.instance_seed(i);
    let init_seed = cfg.init_seed(i);
    let inst = Instance::generate(&cfg.problem, seed)?;
    let scale = cfg.scale.resolve(inst.max_dim());
    let mut metrics = BTreeMap::new();
    let run = match &inst {
        Instance::Maxcut(p) => {
            let x0 = instance::maxcut_start(p, init_seed);
            solve(p, &x0, cfg, scale).map(|r| r.finish(|_| {}))
        }
        Instance::Brockett { problem, a } => {
            let x0 = instance::brockett_start(problem, init_seed);
            solve(problem, &x0, cfg, scale).map(|r| {
                r.finish(|rep| {
                    if let Ok(c) = brockett_check(a, rep.x.repr(), rep.last().f) {
                        metrics.insert("subspace_angle".into(), c.subspace_angle);
                        metrics.insert("f_rel_err".into(), c.f_rel_err);
                    }
                })
            })
        }
        Instance::Karcher { problem, first } => {
            let x0 = instance::karcher_start(problem, first)?;
            solve(problem, &x0, cfg, scale).map(|r| r.finish(|_| {}))
        }
        Instance::Matcomp { problem, data } => {
            let x0 = instance::matcomp_start(problem, init_seed);
            solve(problem, &x0, cfg, scale).map(|r| {
                r.finish(|rep| {
                    metrics.insert("rel_residual".into(), matcomp_relative_residual(data, rep.x.repr()));
                })
            })
        }
    };
    let outcome = match run {
        Ok(o) => o,
        Err(e) => Finished {
            status: Status::NumericalError,
            trace: Vec::new(),
            warm_iterations: 0,
            warm_elapsed_s: 0.0,
            message: Some(e.to_string()),
        },
    };
    let last = outcome.trace.last();
    let pick = |f: fn(&TraceRow) -> f64| last.map(f).unwrap_or(f64::NAN);
    let record = TrialRecord {
        trial: i,
        instance_seed: seed,
        init_seed,
        status: outcome.status,
        iterations: last.map(|r| r.iter).unwrap_or(0),
        warm_iterations: outcome.warm_iterations,
        grad_unscaled: pick(|r| r.grad_unscaled),
        r_norm: pick(|r| r.r_norm),
        f: pick(|r| r.f),
        scale,
        elapsed_s: pick(|r| r.elapsed_s).max(outcome.warm_elapsed_s),
        warm_elapsed_s: outcome.warm_elapsed_s,
        theta_ok: outcome.trace.iter().all(|r| r.theta.is_none_or(|t| t <= 1.0 + 1e-12)),
        metrics,
        message: outcome.message,
    };
    Ok(TrialOutcome {
        record,
        trace: outcome.trace,
    })
}

struct Finished {
    status: Status,
    trace: Vec<TraceRow>,
    warm_iterations: usize,
    warm_elapsed_s: f64,
    message: Option<String>,
}

struct Solved<M: Manifold> {
    report: SolverReport<M>,
    warm_iterations: usize,
    warm_elapsed_s: f64,
}

impl<M: Manifold> Solved<M> {
    fn finish(self, inspect: impl FnOnce(&SolverReport<M>)) -> Finished {
        inspect(&self.report);
        Finished {
            status: self.report.status,
            trace: self.report.trace,
            warm_iterations: self.warm_iterations,
            warm_elapsed_s: self.warm_elapsed_s,
            message: self.report.message,
        }
    }
}

/// Optional RGD warm start followed by the configured solver.
fn solve<M: Manifold>(
    problem: &ProblemInstance<M>,
    x0: &PointOf<M>,
    cfg: &ExperimentConfig,
    scale: f64,
) -> Result<Solved<M>> {
    let clock = Instant::now();
    let (start, warm_iterations) = if cfg.warm_start {
        let warm_cfg = DescentConfig {
            max_iter: cfg.warm_max_iter,
            tol: cfg.warm_tol,
            stop: StopMeasure::Unscaled,
            ..cfg.descent_config(scale)
        };
        let warm = run_rgd(problem, x0, &warm_cfg)?;
        (warm.x.clone(), warm.iterations())
    } else {
        (x0.clone(), 0)
    };
    let warm_elapsed_s = if cfg.warm_start { clock.elapsed().as_secs_f64() } else { 0.0 };
    let mut report = match cfg.solver {
        SolverKind::Ram | SolverKind::Rram => run_mixing(problem, &start, &cfg.mixing_config(scale))?,
        SolverKind::Rgd => run_rgd(problem, &start, &cfg.descent_config(scale))?,
        SolverKind::Rlbfgs => run_rlbfgs(problem, &start, &cfg.descent_config(scale))?,
        SolverKind::Fixedpoint => run_fixed_point(problem, &start, &cfg.fixed_point_config(scale))?,
    };
    report.offset_time(warm_elapsed_s);
    Ok(Solved {
        report,
        warm_iterations,
        warm_elapsed_s,
    })
}
