//! Comparison solvers: Riemannian gradient descent and limited-memory BFGS
//! with backtracking Armijo, and the plain fixed-point iteration.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Manifold, PointOf, TangentOf};
use crate::problems::ProblemInstance;
use crate::solver::{Eval, SolverReport, StallGuard, Status, StopMeasure, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchConfig {
    pub initial_step: f64,
    pub contraction: f64,
    pub sufficient_decrease: f64,
    pub min_step: f64,
    /// Gradient descent only: start each search from unit step length, then
    /// from twice the step that the last decrease predicts.
    pub adaptive: bool,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        LineSearchConfig {
            initial_step: 1.0,
            contraction: 0.5,
            sufficient_decrease: 1e-4,
            min_step: 1e-10,
            adaptive: true,
        }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_step > 0.0
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.sufficient_decrease > 0.0
            && self.sufficient_decrease < 1.0
            && self.min_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid line search settings {self:?}")))
        }
    }
}

/// Accepted trial point of a line search.
#[derive(Debug, Clone)]
pub struct Accepted<M: Manifold> {
    pub x: PointOf<M>,
    pub step: f64,
    pub f: f64,
}

/// Backtracking Armijo on `t ↦ f(R_x(t·dir))`. `None` when the step falls
/// below the minimum.
pub fn armijo<M: Manifold>(
    problem: &ProblemInstance<M>,
    x: &PointOf<M>,
    f0: f64,
    slope: f64,
    dir: &TangentOf<M>,
    ls: &LineSearchConfig,
) -> Result<Option<Accepted<M>>> {
    armijo_from(problem, x, f0, slope, dir, ls, ls.initial_step)
}

/// [`armijo`] with an explicit first trial step.
pub fn armijo_from<M: Manifold>(
    problem: &ProblemInstance<M>,
    x: &PointOf<M>,
    f0: f64,
    slope: f64,
    dir: &TangentOf<M>,
    ls: &LineSearchConfig,
    t0: f64,
) -> Result<Option<Accepted<M>>> {
    let mut t = t0;
    while t >= ls.min_step {
        // a trial point the geometry cannot represent is rejected like an ascent step
        let trial = problem
            .manifold
            .retract(x, &dir.scaled(t))
            .and_then(|y| Ok((problem.cost(&y)?, y)));
        match trial {
            Ok((f, y)) if f <= f0 + ls.sufficient_decrease * t * slope => {
                return Ok(Some(Accepted { x: y, step: t, f }));
            }
            Ok(_) => {}
            Err(e) if e.is_numerical() => {}
            Err(e) => return Err(e),
        }
        t *= ls.contraction;
    }
    Ok(None)
}

/// First trial step of an adaptive gradient-descent search. `prev_f` is the
/// cost before the last accepted step.
pub fn adaptive_trial(ls: &LineSearchConfig, prev_f: Option<f64>, f0: f64, slope: f64, dir_norm: f64) -> f64 {
    let guess = prev_f
        .map(|pf| 4.0 * (pf - f0) / -slope)
        .unwrap_or(ls.initial_step / dir_norm);
    if guess.is_finite() && guess > 0.0 {
        guess
    } else {
        ls.initial_step
    }
}

/// One gradient-descent step. A zero gradient returns `x` itself with the
/// initial step; `None` signals a line-search failure.
pub fn rgd_step<M: Manifold>(
    problem: &ProblemInstance<M>,
    x: &PointOf<M>,
    ls: &LineSearchConfig,
) -> Result<Option<(PointOf<M>, f64)>> {
    let f0 = problem.cost(x)?;
    let g = problem.gradient(x)?;
    let gg = problem.manifold.inner(x, &g, &g)?;
    if gg == 0.0 {
        return Ok(Some((x.clone(), ls.initial_step)));
    }
    Ok(armijo(problem, x, f0, -gg, &g.scaled(-1.0), ls)?.map(|a| (a.x, a.step)))
}

/// One fixed-point step `R_x(−λ grad f(x))`.
pub fn fixed_point_step<M: Manifold>(
    problem: &ProblemInstance<M>,
    x: &PointOf<M>,
    lambda: f64,
) -> Result<PointOf<M>> {
    let g = problem.gradient(x)?;
    problem.manifold.retract(x, &g.scaled(-lambda))
}

/// Curvature pairs `(s, y, 1/⟨s, y⟩)`, oldest first, all based at one point.
pub struct LbfgsMemory<M: Manifold> {
    pairs: VecDeque<(TangentOf<M>, TangentOf<M>, f64)>,
    capacity: usize,
}

impl<M: Manifold> LbfgsMemory<M> {
    pub fn new(capacity: usize) -> Self {
        LbfgsMemory {
            pairs: VecDeque::with_capacity(capacity + 1),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Store `(s, y)` unless `⟨s, y⟩ ≤ 1e-12‖s‖‖y‖`. Returns whether it was kept.
    pub fn push(&mut self, manifold: &M, x: &PointOf<M>, s: TangentOf<M>, y: TangentOf<M>) -> Result<bool> {
        let sy = manifold.inner(x, &s, &y)?;
        let ns = manifold.norm(x, &s)?;
        let ny = manifold.norm(x, &y)?;
        if !(sy > 1e-12 * ns * ny) {
            return Ok(false);
        }
        self.pairs.push_back((s, y, 1.0 / sy));
        if self.pairs.len() > self.capacity {
            self.pairs.pop_front();
        }
        Ok(true)
    }

    /// Transport every pair from `x` to `y`.
    pub fn transport(&mut self, manifold: &M, x: &PointOf<M>, y: &PointOf<M>) -> Result<()> {
        for (s, yv, _) in self.pairs.iter_mut() {
            *s = manifold.transport_to(x, y, s)?;
            *yv = manifold.transport_to(x, y, yv)?;
        }
        Ok(())
    }

    /// Two-loop recursion; falls back to `−grad` if the result does not descend.
    pub fn direction(&self, manifold: &M, x: &PointOf<M>, grad: &TangentOf<M>) -> Result<TangentOf<M>> {
        let mut q = grad.clone();
        let mut a = vec![0.0; self.pairs.len()];
        for (i, (s, y, rho)) in self.pairs.iter().enumerate().rev() {
            a[i] = rho * manifold.inner(x, s, &q)?;
            q.axpy_mut(-a[i], y);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = manifold.inner(x, s, y)? / manifold.inner(x, y, y)?;
            q.scale_mut(gamma);
        }
        for (i, (s, y, rho)) in self.pairs.iter().enumerate() {
            let b = rho * manifold.inner(x, y, &q)?;
            q.axpy_mut(a[i] - b, s);
        }
        q.scale_mut(-1.0);
        let slope = manifold.inner(x, grad, &q)?;
        if slope < 0.0 && slope.is_finite() {
            Ok(q)
        } else {
            Ok(grad.scaled(-1.0))
        }
    }
}

/// One RLBFGS step; the memory is moved to the new point.
pub fn rlbfgs_step<M: Manifold>(
    problem: &ProblemInstance<M>,
    x: &PointOf<M>,
    memory: &mut LbfgsMemory<M>,
    ls: &LineSearchConfig,
) -> Result<Option<PointOf<M>>> {
    let man = &problem.manifold;
    let f0 = problem.cost(x)?;
    let g = problem.gradient(x)?;
    let dir = memory.direction(man, x, &g)?;
    let slope = man.inner(x, &g, &dir)?;
    if slope == 0.0 {
        return Ok(Some(x.clone()));
    }
    let Some(acc) = armijo(problem, x, f0, slope, &dir, ls)? else {
        return Ok(None);
    };
    let s = man.transport_to(x, &acc.x, &dir.scaled(acc.step))?;
    let g_new = problem.gradient(&acc.x)?;
    let y = g_new.sub(&man.transport_to(x, &acc.x, &g)?);
    memory.transport(man, x, &acc.x)?;
    memory.push(man, &acc.x, s, y)?;
    Ok(Some(acc.x))
}

/// Settings shared by the baseline runners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub line_search: LineSearchConfig,
    pub max_iter: usize,
    pub tol: f64,
    pub stop: StopMeasure,
    /// `λ`, only used for the scaled residual column of the trace.
    pub scale: f64,
    /// RLBFGS memory.
    pub memory: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            line_search: LineSearchConfig::default(),
            max_iter: 1000,
            tol: 1e-6,
            stop: StopMeasure::Unscaled,
            scale: 1.0,
            memory: 10,
        }
    }
}

/// Fixed-point iteration `x ← R_x(β·r)` with `r = −λ grad f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub scale: f64,
    pub beta: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub stop: StopMeasure,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            scale: 1.0,
            beta: 1.0,
            max_iter: 1000,
            tol: 1e-6,
            stop: StopMeasure::Unscaled,
        }
    }
}

enum Method {
    Rgd,
    Lbfgs,
}

pub fn run_rgd<M: Manifold>(
    problem: &ProblemInstance<M>,
    x0: &PointOf<M>,
    cfg: &DescentConfig,
) -> Result<SolverReport<M>> {
    run_descent(problem, x0, cfg, Method::Rgd)
}

pub fn run_rlbfgs<M: Manifold>(
    problem: &ProblemInstance<M>,
    x0: &PointOf<M>,
    cfg: &DescentConfig,
) -> Result<SolverReport<M>> {
    run_descent(problem, x0, cfg, Method::Lbfgs)
}

fn report<M: Manifold>(status: Status, x: PointOf<M>, trace: Vec<TraceRow>, msg: Option<String>) -> SolverReport<M> {
    SolverReport {
        status,
        x,
        trace,
        message: msg,
    }
}

fn nan_row(clock: &Instant) -> TraceRow {
    TraceRow {
        iter: 0,
        elapsed_s: clock.elapsed().as_secs_f64(),
        grad_unscaled: f64::NAN,
        r_norm: f64::NAN,
        f: f64::NAN,
        step_norm: None,
        theta: None,
        alpha: None,
        delta: None,
        gamma_reset: false,
    }
}

fn run_descent<M: Manifold>(
    problem: &ProblemInstance<M>,
    x0: &PointOf<M>,
    cfg: &DescentConfig,
    method: Method,
) -> Result<SolverReport<M>> {
    cfg.line_search.validate()?;
    if !(cfg.tol > 0.0 && cfg.scale > 0.0) || cfg.memory == 0 {
        return Err(Error::InvalidInput("tol, scale and memory must be positive".into()));
    }
    let man = &problem.manifold;
    man.validate(x0.repr())?;
    let clock = Instant::now();
    let mut x = x0.clone();
    let mut trace = Vec::new();
    let mut cur = match Eval::at(problem, &x, cfg.scale) {
        Ok(e) => e,
        Err(e) => return Ok(report(Status::NumericalError, x, vec![nan_row(&clock)], Some(e.to_string()))),
    };
    let mut memory = LbfgsMemory::new(cfg.memory);
    let mut stall = StallGuard::default();
    let mut prev_f = None;
    let mut k = 0;
    loop {
        let mut row = cur.row(k, &clock);
        if cur.measure(cfg.stop) < cfg.tol {
            trace.push(row);
            return Ok(report(Status::Converged, x, trace, None));
        }
        if k >= cfg.max_iter {
            trace.push(row);
            return Ok(report(Status::MaxIter, x, trace, None));
        }
        let ls = &cfg.line_search;
        let step = (|| -> Result<Option<(Accepted<M>, TangentOf<M>)>> {
            let (dir, t0) = match method {
                Method::Rgd => {
                    let t0 = if ls.adaptive {
                        adaptive_trial(ls, prev_f, cur.f, -cur.gnorm * cur.gnorm, cur.gnorm)
                    } else {
                        ls.initial_step
                    };
                    (cur.grad.scaled(-1.0), t0)
                }
                Method::Lbfgs => (memory.direction(man, &x, &cur.grad)?, ls.initial_step),
            };
            let slope = man.inner(&x, &cur.grad, &dir)?;
            Ok(armijo_from(problem, &x, cur.f, slope, &dir, ls, t0)?.map(|a| (a, dir)))
        })();
        let (acc, dir) = match step {
            Ok(Some(v)) => v,
            Ok(None) => {
                trace.push(row);
                return Ok(report(Status::Stalled, x, trace, Some("line search step below minimum".into())));
            }
            Err(e) => {
                trace.push(row);
                return Ok(report(Status::NumericalError, x, trace, Some(e.to_string())));
            }
        };
        let step_vec = dir.scaled(acc.step);
        let step_norm = man.norm(&x, &step_vec)?;
        row.step_norm = Some(step_norm);
        trace.push(row);
        let next = match Eval::at(problem, &acc.x, cfg.scale) {
            Ok(e) => e,
            Err(e) => return Ok(report(Status::NumericalError, x, trace, Some(e.to_string()))),
        };
        if let Method::Lbfgs = method {
            let upd = (|| -> Result<()> {
                let s = man.transport_to(&x, &acc.x, &step_vec)?;
                let y = next.grad.sub(&man.transport_to(&x, &acc.x, &cur.grad)?);
                memory.transport(man, &x, &acc.x)?;
                memory.push(man, &acc.x, s, y)?;
                Ok(())
            })();
            if let Err(e) = upd {
                return Ok(report(Status::NumericalError, x, trace, Some(e.to_string())));
            }
        }
        x = acc.x;
        prev_f = Some(cur.f);
        cur = next;
        k += 1;
        if stall.push(step_norm) {
            trace.push(cur.row(k, &clock));
            return Ok(report(Status::Stalled, x, trace, None));
        }
    }
}

pub fn run_fixed_point<M: Manifold>(
    problem: &ProblemInstance<M>,
    x0: &PointOf<M>,
    cfg: &FixedPointConfig,
) -> Result<SolverReport<M>> {
    if !(cfg.scale > 0.0 && cfg.beta > 0.0 && cfg.beta <= 1.0 && cfg.tol > 0.0) {
        return Err(Error::InvalidInput(format!("invalid fixed-point settings {cfg:?}")));
    }
    let man = &problem.manifold;
    man.validate(x0.repr())?;
    let clock = Instant::now();
    let mut x = x0.clone();
    let mut trace = Vec::new();
    let mut cur = match Eval::at(problem, &x, cfg.scale) {
        Ok(e) => e,
        Err(e) => return Ok(report(Status::NumericalError, x, vec![nan_row(&clock)], Some(e.to_string()))),
    };
    let mut stall = StallGuard::default();
    let mut k = 0;
    loop {
        let mut row = cur.row(k, &clock);
        if cur.measure(cfg.stop) < cfg.tol {
            trace.push(row);
            return Ok(report(Status::Converged, x, trace, None));
        }
        if k >= cfg.max_iter {
            trace.push(row);
            return Ok(report(Status::MaxIter, x, trace, None));
        }
        let dir = cur.r.scaled(cfg.beta);
        let step_norm = cfg.beta * cur.rnorm;
        row.step_norm = Some(step_norm);
        trace.push(row);
        let next = man.retract(&x, &dir).and_then(|y| Ok((Eval::at(problem, &y, cfg.scale)?, y)));
        let (e, y) = match next {
            Ok(v) => v,
            Err(e) => return Ok(report(Status::NumericalError, x, trace, Some(e.to_string()))),
        };
        x = y;
        cur = e;
        k += 1;
        if stall.push(step_norm) {
            trace.push(cur.row(k, &clock));
            return Ok(report(Status::Stalled, x, trace, None));
        }
    }
}
