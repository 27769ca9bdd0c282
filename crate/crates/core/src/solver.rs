//! Types shared by every iterative solver: termination status, per-iterate
//! trace rows and the final report.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Manifold, PointOf, TangentOf};
use crate::problems::ProblemInstance;

/// Step norms below this count towards stall detection.
pub const STALL_STEP: f64 = 1e-14;
/// Consecutive tiny steps before a run is declared stalled.
pub const STALL_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    Stalled,
    NumericalError,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::Stalled => "stalled",
            Status::NumericalError => "numerical_error",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row per iterate `x_k`. Step fields describe the step taken from `x_k`
/// and are `None` on the terminal row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub elapsed_s: f64,
    pub grad_unscaled: f64,
    pub r_norm: f64,
    pub f: f64,
    pub step_norm: Option<f64>,
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    /// Γ was discarded (cap violated, singular system or a retried step).
    #[serde(default)]
    pub gamma_reset: bool,
}

impl TraceRow {
    /// Row fields that must agree bit for bit between two runs, excluding time.
    pub fn numeric_key(&self) -> [Option<u64>; 8] {
        let b = |v: f64| Some(v.to_bits());
        let o = |v: Option<f64>| v.map(f64::to_bits);
        [
            Some(self.iter as u64),
            b(self.grad_unscaled),
            b(self.r_norm),
            b(self.f),
            o(self.step_norm),
            o(self.theta),
            o(self.alpha),
            o(self.delta),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport<M: Manifold> {
    pub status: Status,
    pub x: PointOf<M>,
    pub trace: Vec<TraceRow>,
    pub message: Option<String>,
}

impl<M: Manifold> SolverReport<M> {
    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.last().iter
    }

    pub fn last(&self) -> &TraceRow {
        self.trace.last().expect("trace is never empty")
    }

    pub fn final_grad(&self) -> f64 {
        self.last().grad_unscaled
    }

    pub fn final_r_norm(&self) -> f64 {
        self.last().r_norm
    }

    pub fn elapsed_s(&self) -> f64 {
        self.last().elapsed_s
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// Shift every timestamp by `dt` seconds.
    pub fn offset_time(&mut self, dt: f64) {
        for row in &mut self.trace {
            row.elapsed_s += dt;
        }
    }
}

/// Which gradient norm the stopping test uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMeasure {
    /// `‖grad f‖`.
    #[default]
    Unscaled,
    /// `‖r‖ = λ‖grad f‖`.
    Scaled,
}

/// Cost and gradient at an iterate.
#[derive(Debug, Clone)]
pub(crate) struct Eval<M: Manifold> {
    pub f: f64,
    pub grad: TangentOf<M>,
    pub gnorm: f64,
    pub r: TangentOf<M>,
    pub rnorm: f64,
}

impl<M: Manifold> Eval<M> {
    pub fn at(problem: &ProblemInstance<M>, x: &PointOf<M>, scale: f64) -> Result<Self> {
        let f = problem.cost(x)?;
        let grad = problem.gradient(x)?;
        let gnorm = problem.manifold.norm(x, &grad)?;
        let r = grad.scaled(-scale);
        let rnorm = problem.manifold.norm(x, &r)?;
        if !(f.is_finite() && gnorm.is_finite() && rnorm.is_finite()) {
            return Err(Error::NonFinite("cost or gradient"));
        }
        Ok(Eval { f, grad, gnorm, r, rnorm })
    }

    pub fn measure(&self, m: StopMeasure) -> f64 {
        match m {
            StopMeasure::Unscaled => self.gnorm,
            StopMeasure::Scaled => self.rnorm,
        }
    }

    pub fn row(&self, iter: usize, clock: &Instant) -> TraceRow {
        TraceRow {
            iter,
            elapsed_s: clock.elapsed().as_secs_f64(),
            grad_unscaled: self.gnorm,
            r_norm: self.rnorm,
            f: self.f,
            step_norm: None,
            theta: None,
            alpha: None,
            delta: None,
            gamma_reset: false,
        }
    }
}

/// Counts consecutive tiny steps.
#[derive(Debug, Default)]
pub(crate) struct StallGuard(usize);

impl StallGuard {
    /// Record a step and report whether the run has stalled.
    pub fn push(&mut self, step_norm: f64) -> bool {
        if step_norm < STALL_STEP {
            self.0 += 1;
        } else {
            self.0 = 0;
        }
        self.0 >= STALL_COUNT
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stall_needs_consecutive_steps() {
        let mut g = StallGuard::default();
        for _ in 0..4 {
            assert!(!g.push(1e-15));
        }
        assert!(!g.push(1.0));
        for _ in 0..4 {
            assert!(!g.push(0.0));
        }
        assert!(g.push(0.0));
    }

    #[test]
    fn status_serializes_snake_case() {
        assert_eq!(serde_json::to_string(&Status::MaxIter).unwrap(), "\"max_iter\"");
        assert_eq!(Status::NumericalError.to_string(), "numerical_error");
    }
}
