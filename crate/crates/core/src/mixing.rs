//! Riemannian Anderson mixing (RAM) and its regularized variant (RRAM).
//!
//! Both iterate `x_{k+1} = R_{x_k}(Δx_k)` on the scaled residual
//! `r_k = −λ grad f(x_k)`, mixing the last `m` transported step and residual
//! differences.

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym_eig;
use crate::manifold::{check_base, Manifold, PointOf, TangentOf};
use crate::problems::ProblemInstance;
use crate::solver::{Eval, SolverReport, StallGuard, Status, StopMeasure, TraceRow};

/// Condition number above which the Γ system gets a ridge.
pub const RIDGE_COND: f64 = 1e14;
/// Ridge weight relative to `tr(G_R)/m_k`.
pub const RIDGE_WEIGHT: f64 = 1e-12;

/// Transported history `X_k = [Δx_i]`, `R_k = [Δr_i]`, oldest column first.
pub struct HistoryBuffer<M: Manifold> {
    base: PointOf<M>,
    dx: VecDeque<TangentOf<M>>,
    dr: VecDeque<TangentOf<M>>,
    capacity: usize,
}

impl<M: Manifold> Clone for HistoryBuffer<M> {
    fn clone(&self) -> Self {
        HistoryBuffer {
            base: self.base.clone(),
            dx: self.dx.clone(),
            dr: self.dr.clone(),
            capacity: self.capacity,
        }
    }
}

impl<M: Manifold> std::fmt::Debug for HistoryBuffer<M> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HistoryBuffer")
            .field("base", &self.base.id())
            .field("len", &self.len())
            .field("capacity", &self.capacity)
            .finish()
    }
}

impl<M: Manifold> HistoryBuffer<M> {
    pub fn new(base: PointOf<M>, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidInput("history capacity must be >= 1".into()));
        }
        Ok(HistoryBuffer {
            base,
            dx: VecDeque::with_capacity(capacity + 1),
            dr: VecDeque::with_capacity(capacity + 1),
            capacity,
        })
    }

    /// Build a buffer from explicit columns, all based at `base`.
    pub fn from_columns(
        base: PointOf<M>,
        capacity: usize,
        dx: Vec<TangentOf<M>>,
        dr: Vec<TangentOf<M>>,
    ) -> Result<Self> {
        if dx.len() != dr.len() || dx.len() > capacity {
            return Err(Error::DimensionMismatch(format!(
                "{} dx and {} dr columns for capacity {capacity}",
                dx.len(),
                dr.len()
            )));
        }
        for c in dx.iter().chain(&dr) {
            check_base(&base, c)?;
        }
        let mut h = HistoryBuffer::new(base, capacity)?;
        h.dx.extend(dx);
        h.dr.extend(dr);
        Ok(h)
    }

    pub fn base(&self) -> &PointOf<M> {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.dx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dx.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dx_cols(&self) -> impl Iterator<Item = &TangentOf<M>> {
        self.dx.iter()
    }

    pub fn dr_cols(&self) -> impl Iterator<Item = &TangentOf<M>> {
        self.dr.iter()
    }

    /// Drop all columns, keeping the base point.
    pub fn clear(&mut self) {
        self.dx.clear();
        self.dr.clear();
    }

    /// Move the buffer to `x_new = R_base(step)`: transport every column once,
    /// append `(T step, r_new − T r_old)` and evict the oldest pair if full.
    pub fn advance(
        &mut self,
        manifold: &M,
        x_new: &PointOf<M>,
        step: &TangentOf<M>,
        r_old: &TangentOf<M>,
        r_new: &TangentOf<M>,
    ) -> Result<()> {
        check_base(&self.base, step)?;
        check_base(&self.base, r_old)?;
        check_base(x_new, r_new)?;
        let x = &self.base;
        let move_all = |cols: &VecDeque<TangentOf<M>>| -> Result<VecDeque<TangentOf<M>>> {
            cols.iter().map(|c| manifold.transport_to(x, x_new, c)).collect()
        };
        let mut dx = move_all(&self.dx)?;
        let mut dr = move_all(&self.dr)?;
        dx.push_back(manifold.transport_to(x, x_new, step)?);
        dr.push_back(r_new.sub(&manifold.transport_to(x, x_new, r_old)?));
        while dx.len() > self.capacity {
            dx.pop_front();
            dr.pop_front();
        }
        self.dx = dx;
        self.dr = dr;
        self.base = x_new.clone();
        Ok(())
    }

    fn gram(&self, manifold: &M, a: &VecDeque<TangentOf<M>>, b: &VecDeque<TangentOf<M>>) -> DMatrix<f64> {
        let x = self.base.repr();
        DMatrix::from_fn(a.len(), b.len(), |i, j| {
            manifold.inner_at(x, a[i].coords(), b[j].coords())
        })
    }

    /// `(G_X)_{ij} = ⟨Δx_i, Δx_j⟩`.
    pub fn gram_x(&self, manifold: &M) -> DMatrix<f64> {
        self.gram(manifold, &self.dx, &self.dx)
    }

    /// `(G_R)_{ij} = ⟨Δr_i, Δr_j⟩`.
    pub fn gram_r(&self, manifold: &M) -> DMatrix<f64> {
        self.gram(manifold, &self.dr, &self.dr)
    }
}

/// Solution of the (regularized) least-squares mixing subproblem.
#[derive(Debug, Clone)]
pub struct GammaSolve<M: Manifold> {
    pub gamma: DVector<f64>,
    pub rbar: TangentOf<M>,
    /// `‖r̄‖/‖r‖`.
    pub theta: f64,
    /// The system was ridged.
    pub ridged: bool,
    /// Γ was replaced by zero.
    pub zeroed: bool,
}

/// `r − R_k Γ`.
pub fn residual<M: Manifold>(h: &HistoryBuffer<M>, r: &TangentOf<M>, gamma: &DVector<f64>) -> TangentOf<M> {
    let mut out = r.clone();
    for (g, c) in gamma.iter().zip(&h.dr) {
        out.axpy_mut(-g, c);
    }
    out
}

/// `argmin ‖r − R_kΓ‖² + δ‖X_kΓ‖²` via the normal equations under the metric.
pub fn solve_gamma<M: Manifold>(
    h: &HistoryBuffer<M>,
    manifold: &M,
    r: &TangentOf<M>,
    delta: f64,
) -> Result<GammaSolve<M>> {
    check_base(&h.base, r)?;
    if h.is_empty() {
        return Err(Error::InvalidInput("solve_gamma needs at least one history column".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("delta must be >= 0, got {delta}")));
    }
    let m = h.len();
    let x = h.base.repr();
    let g_r = h.gram_r(manifold);
    let mut k = g_r.clone();
    if delta > 0.0 {
        k += h.gram_x(manifold) * delta;
    }
    let b = DVector::from_fn(m, |i, _| manifold.inner_at(x, h.dr[i].coords(), r.coords()));
    let rnorm = manifold.inner_at(x, r.coords(), r.coords()).max(0.0).sqrt();

    let zero = |ridged| GammaSolve {
        gamma: DVector::zeros(m),
        rbar: r.clone(),
        theta: 1.0,
        ridged,
        zeroed: true,
    };
    if !k.iter().all(|v| v.is_finite()) || !b.iter().all(|v| v.is_finite()) {
        return Ok(zero(false));
    }
    let mut ridged = false;
    let eig = sym_eig(&k)?;
    let cond = if eig.min() > 0.0 { eig.max() / eig.min() } else { f64::INFINITY };
    if cond > RIDGE_COND {
        let ridge = RIDGE_WEIGHT * g_r.trace() / m as f64;
        for i in 0..m {
            k[(i, i)] += ridge;
        }
        ridged = true;
    }
    let Some(chol) = k.cholesky() else {
        return Ok(zero(ridged));
    };
    let gamma = chol.solve(&b);
    if !gamma.iter().all(|v| v.is_finite()) {
        return Ok(zero(ridged));
    }
    let rbar = residual(h, r, &gamma);
    let rbar_norm = manifold.inner_at(x, rbar.coords(), rbar.coords()).max(0.0).sqrt();
    let theta = if rnorm > 0.0 { rbar_norm / rnorm } else { 1.0 };
    if theta > 1.0 + 1e-12 {
        return Ok(zero(ridged));
    }
    Ok(GammaSolve {
        gamma,
        rbar,
        theta,
        ridged,
        zeroed: false,
    })
}

/// `β r̄ − X_kΓ`.
pub fn ram_direction<M: Manifold>(
    h: &HistoryBuffer<M>,
    rbar: &TangentOf<M>,
    gamma: &DVector<f64>,
    beta: f64,
) -> TangentOf<M> {
    let mut d = rbar.scaled(beta);
    for (g, c) in gamma.iter().zip(&h.dx) {
        d.axpy_mut(-g, c);
    }
    d
}

/// `β r − α(X_k + βR_k)Γ`. Reduces exactly to `β r` at `α = 0` and to
/// [`ram_direction`] at `α = 1`.
pub fn rram_direction<M: Manifold>(
    h: &HistoryBuffer<M>,
    r: &TangentOf<M>,
    gamma: &DVector<f64>,
    alpha: f64,
    beta: f64,
) -> TangentOf<M> {
    if alpha == 0.0 {
        return r.scaled(beta);
    }
    let am = ram_direction(h, &residual(h, r, gamma), gamma, beta);
    if alpha == 1.0 {
        return am;
    }
    let mut d = r.scaled((1.0 - alpha) * beta);
    d.axpy_mut(alpha, &am);
    d
}

/// Largest eigenvalue of `E + E*` on the span of the history columns, where
/// `E(v) = (X + βR)(G_R + δG_X)⁻¹ R^♭ v`.
pub fn lambda_max_sym<M: Manifold>(h: &HistoryBuffer<M>, manifold: &M, beta: f64, delta: f64) -> Result<f64> {
    if h.is_empty() {
        return Err(Error::InvalidInput("lambda_max_sym needs history".into()));
    }
    let m = h.len();
    let mut k = h.gram_r(manifold);
    if delta > 0.0 {
        k += h.gram_x(manifold) * delta;
    }
    let kinv = k
        .cholesky()
        .ok_or_else(|| Error::Singular("mixing Gram matrix".into()))?
        .inverse();

    // Z = [X R], G_Z = Z^♭ Z
    let mut cols: VecDeque<TangentOf<M>> = h.dx.clone();
    cols.extend(h.dr.iter().cloned());
    let gz = h.gram(manifold, &cols, &cols);
    let eig = sym_eig(&gz)?;
    let top = eig.max();
    if !(top > 0.0) {
        return Err(Error::Singular("history columns are all zero".into()));
    }
    let keep: Vec<usize> = (0..2 * m).filter(|&i| eig.values[i] > 1e-12 * top).collect();
    let l = DMatrix::from_fn(2 * m, keep.len(), |i, j| {
        eig.vectors[(i, keep[j])] * eig.values[keep[j]].sqrt()
    });

    // T = P_B K⁻¹ P_Rᵀ + P_R K⁻¹ P_Bᵀ with P_B = [I; βI], P_R = [0; I]
    let mut pb = DMatrix::zeros(2 * m, m);
    let mut pr = DMatrix::zeros(2 * m, m);
    for i in 0..m {
        pb[(i, i)] = 1.0;
        pb[(m + i, i)] = beta;
        pr[(m + i, i)] = 1.0;
    }
    let half = &pb * &kinv * pr.transpose();
    let t = &half + half.transpose();
    let core = l.transpose() * t * &l;
    Ok(sym_eig(&core)?.max())
}

/// `c₁‖r_k‖/‖Δx_{k−1}‖`, or `c₁` without a usable previous step.
pub fn adaptive_delta(r_norm: f64, prev_step_norm: Option<f64>, c1: f64) -> f64 {
    match prev_step_norm {
        Some(p) if p > 1e-300 => c1 * r_norm / p,
        _ => c1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Ram,
    Rram,
}

/// Rule for the RRAM safeguard `α_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// `α = 1` when the mixed direction descends, else `α = 0`.
    DescentCheck,
    /// `α = min(1, 2β(1−μ)/λ_k)`.
    ExactBound { mu: f64 },
    Fixed(f64),
}

/// Rule for the RRAM regularization weight `δ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    Adaptive { c1: f64 },
    Fixed(f64),
}

/// `min(1, 2β(1−μ)/λ_k)`, or 1 when `λ_k ≤ 0`.
pub fn alpha_bound(lambda_k: f64, beta: f64, mu: f64) -> f64 {
    if lambda_k > 0.0 {
        (2.0 * beta * (1.0 - mu) / lambda_k).min(1.0)
    } else {
        1.0
    }
}

/// Outcome of [`choose_alpha`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaChoice {
    pub alpha: f64,
    pub lambda_k: Option<f64>,
}

/// Pick `α_k` given the `α = 1` candidate direction.
#[allow(clippy::too_many_arguments)]
pub fn choose_alpha<M: Manifold>(
    mode: AlphaMode,
    manifold: &M,
    h: &HistoryBuffer<M>,
    grad: &TangentOf<M>,
    candidate: &TangentOf<M>,
    beta: f64,
    delta: f64,
) -> Result<AlphaChoice> {
    Ok(match mode {
        AlphaMode::DescentCheck => {
            let slope = manifold.inner(&h.base, grad, candidate)?;
            AlphaChoice {
                alpha: if slope < 0.0 { 1.0 } else { 0.0 },
                lambda_k: None,
            }
        }
        AlphaMode::ExactBound { mu } => match lambda_max_sym(h, manifold, beta, delta) {
            Ok(l) => AlphaChoice {
                alpha: alpha_bound(l, beta, mu),
                lambda_k: Some(l),
            },
            Err(_) => AlphaChoice {
                alpha: 0.0,
                lambda_k: None,
            },
        },
        AlphaMode::Fixed(a) => AlphaChoice {
            alpha: a.clamp(0.0, 1.0),
            lambda_k: None,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingConfig {
    pub variant: Variant,
    pub beta: f64,
    pub memory: usize,
    pub alpha_mode: AlphaMode,
    pub delta_mode: DeltaMode,
    pub gamma_cap: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// `λ` in `r = −λ grad f`.
    pub scale: f64,
    pub stop: StopMeasure,
}

impl Default for MixingConfig {
    fn default() -> Self {
        MixingConfig {
            variant: Variant::Ram,
            beta: 0.6,
            memory: 3,
            alpha_mode: AlphaMode::DescentCheck,
            delta_mode: DeltaMode::Adaptive { c1: 1e-7 },
            gamma_cap: 1e4,
            max_iter: 1000,
            tol: 1e-6,
            scale: 1.0,
            stop: StopMeasure::Unscaled,
        }
    }
}

impl MixingConfig {
    pub fn ram() -> Self {
        MixingConfig::default()
    }

    pub fn rram() -> Self {
        MixingConfig {
            variant: Variant::Rram,
            ..MixingConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta must lie in (0, 1], got {}", self.beta));
        }
        if self.memory == 0 {
            return bad("memory must be >= 1".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be > 0, got {}", self.tol));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad(format!("scale must be > 0, got {}", self.scale));
        }
        if !(self.gamma_cap > 0.0) {
            return bad(format!("gamma cap must be > 0, got {}", self.gamma_cap));
        }
        if let AlphaMode::ExactBound { mu } = self.alpha_mode {
            if !(mu > 0.0 && mu < 1.0) {
                return bad(format!("mu must lie in (0, 1), got {mu}"));
            }
        }
        match self.delta_mode {
            DeltaMode::Adaptive { c1 } if !(c1 > 0.0) => bad(format!("c1 must be > 0, got {c1}")),
            DeltaMode::Fixed(d) if !(d >= 0.0) => bad(format!("delta must be >= 0, got {d}")),
            _ => Ok(()),
        }
    }
}

/// A planned step from the current iterate.
struct Plan<M: Manifold> {
    dir: TangentOf<M>,
    theta: Option<f64>,
    alpha: Option<f64>,
    delta: Option<f64>,
    reset: bool,
}

/// Run RAM or RRAM from `x0`.
pub fn run_mixing<M: Manifold>(
    problem: &ProblemInstance<M>,
    x0: &PointOf<M>,
    cfg: &MixingConfig,
) -> Result<SolverReport<M>> {
    cfg.validate()?;
    let man = &problem.manifold;
    man.validate(x0.repr())?;
    let clock = Instant::now();
    let mut trace = Vec::new();
    let mut x = x0.clone();
    let fail = |x: PointOf<M>, trace: Vec<TraceRow>, e: Error| SolverReport {
        status: Status::NumericalError,
        x,
        trace,
        message: Some(e.to_string()),
    };
    let mut cur = match Eval::at(problem, &x, cfg.scale) {
        Ok(e) => e,
        Err(e) => {
            let row = TraceRow {
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
            };
            return Ok(fail(x, vec![row], e));
        }
    };
    let mut hist = HistoryBuffer::new(x.clone(), cfg.memory)?;
    let mut prev_step: Option<f64> = None;
    let mut stall = StallGuard::default();
    let mut k = 0usize;

    loop {
        let mut row = cur.row(k, &clock);
        if cur.measure(cfg.stop) < cfg.tol {
            trace.push(row);
            return Ok(done(Status::Converged, x, trace));
        }
        if k >= cfg.max_iter {
            trace.push(row);
            return Ok(done(Status::MaxIter, x, trace));
        }

        let plan = match plan_step(problem, cfg, &mut hist, &cur, k, prev_step) {
            Ok(p) => p,
            Err(e) => {
                trace.push(row);
                return Ok(fail(x, trace, e));
            }
        };
        let mut plan = plan;
        let mut attempt = try_step(problem, &x, &plan.dir, cfg.scale);
        if attempt.is_err() && !hist.is_empty() {
            hist.clear();
            plan = Plan {
                dir: cur.r.scaled(cfg.beta),
                theta: None,
                alpha: None,
                delta: None,
                reset: true,
            };
            attempt = try_step(problem, &x, &plan.dir, cfg.scale);
        }
        let step_norm = man.norm(&x, &plan.dir)?;
        row.step_norm = Some(step_norm);
        row.theta = plan.theta;
        row.alpha = plan.alpha;
        row.delta = plan.delta;
        row.gamma_reset = plan.reset;
        trace.push(row);
        let (x_new, next) = match attempt {
            Ok(v) => v,
            Err(e) => return Ok(fail(x, trace, e)),
        };
        if let Err(e) = hist.advance(man, &x_new, &plan.dir, &cur.r, &next.r) {
            return Ok(fail(x, trace, e));
        }
        x = x_new;
        cur = next;
        prev_step = Some(step_norm);
        k += 1;
        if stall.push(step_norm) {
            trace.push(cur.row(k, &clock));
            return Ok(done(Status::Stalled, x, trace));
        }
    }
}

fn done<M: Manifold>(status: Status, x: PointOf<M>, trace: Vec<TraceRow>) -> SolverReport<M> {
    SolverReport {
        status,
        x,
        trace,
        message: None,
    }
}

fn try_step<M: Manifold>(
    problem: &ProblemInstance<M>,
    x: &PointOf<M>,
    dir: &TangentOf<M>,
    scale: f64,
) -> Result<(PointOf<M>, Eval<M>)> {
    let y = problem.manifold.retract(x, dir)?;
    let e = Eval::at(problem, &y, scale)?;
    Ok((y, e))
}

fn plan_step<M: Manifold>(
    problem: &ProblemInstance<M>,
    cfg: &MixingConfig,
    hist: &mut HistoryBuffer<M>,
    cur: &Eval<M>,
    k: usize,
    prev_step: Option<f64>,
) -> Result<Plan<M>> {
    let man = &problem.manifold;
    let plain = |dir, reset| Plan {
        dir,
        theta: None,
        alpha: None,
        delta: None,
        reset,
    };
    if k == 0 {
        return Ok(plain(cur.r.clone(), false));
    }
    if hist.is_empty() {
        return Ok(plain(cur.r.scaled(cfg.beta), false));
    }
    let delta = match (cfg.variant, cfg.delta_mode) {
        (Variant::Ram, _) => 0.0,
        (Variant::Rram, DeltaMode::Fixed(d)) => d,
        (Variant::Rram, DeltaMode::Adaptive { c1 }) => {
            adaptive_delta(cur.rnorm, if k == 1 { None } else { prev_step }, c1)
        }
    };
    let sol = solve_gamma(hist, man, &cur.r, delta)?;
    let cap_hit = sol.gamma.amax() > cfg.gamma_cap;
    if cap_hit {
        hist.clear();
    }
    let (gamma, rbar, theta) = if cap_hit {
        (DVector::zeros(sol.gamma.len()), cur.r.clone(), 1.0)
    } else {
        (sol.gamma, sol.rbar, sol.theta)
    };
    let reset = cap_hit || sol.zeroed;
    match cfg.variant {
        Variant::Ram => {
            let dir = if cap_hit {
                cur.r.scaled(cfg.beta)
            } else {
                ram_direction(hist, &rbar, &gamma, cfg.beta)
            };
            Ok(Plan {
                dir,
                theta: Some(theta),
                alpha: None,
                delta: None,
                reset,
            })
        }
        Variant::Rram => {
            if cap_hit {
                return Ok(Plan {
                    dir: cur.r.scaled(cfg.beta),
                    theta: Some(theta),
                    alpha: Some(0.0),
                    delta: Some(delta),
                    reset,
                });
            }
            let candidate = ram_direction(hist, &rbar, &gamma, cfg.beta);
            let choice = choose_alpha(cfg.alpha_mode, man, hist, &cur.grad, &candidate, cfg.beta, delta)?;
            let dir = if choice.alpha == 1.0 {
                candidate
            } else {
                rram_direction(hist, &cur.r, &gamma, choice.alpha, cfg.beta)
            };
            Ok(Plan {
                dir,
                theta: Some(theta),
                alpha: Some(choice.alpha),
                delta: Some(delta),
                reset,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometries::{Euclidean, Oblique};
    use crate::problems::rayleigh_problem;
    use crate::random::seeded_rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    type Flat = Euclidean;

    fn v2(a: f64, b: f64) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[a, b])
    }

    fn flat_history(dx: (f64, f64), dr: (f64, f64)) -> (Flat, HistoryBuffer<Flat>) {
        let e = Euclidean::vector(2);
        let x = e.point(v2(0.0, 0.0)).unwrap();
        let dx = e.tangent(&x, v2(dx.0, dx.1));
        let dr = e.tangent(&x, v2(dr.0, dr.1));
        let h = HistoryBuffer::from_columns(x, 3, vec![dx], vec![dr]).unwrap();
        (e, h)
    }

    fn coords(t: &TangentOf<Flat>) -> (f64, f64) {
        (t.coords()[0], t.coords()[1])
    }

    #[test]
    fn first_advance_adds_one_pair() {
        let e = Euclidean::vector(2);
        let x0 = e.point(v2(0.0, 0.0)).unwrap();
        let mut h = HistoryBuffer::new(x0.clone(), 3).unwrap();
        let step = e.tangent(&x0, v2(1.0, 0.0));
        let r0 = e.tangent(&x0, v2(2.0, 0.0));
        let x1 = e.retract(&x0, &step).unwrap();
        let r1 = e.tangent(&x1, v2(1.0, 0.0));
        h.advance(&e, &x1, &step, &r0, &r1).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.base().id(), x1.id());
        assert_eq!(coords(h.dr_cols().next().unwrap()), (-1.0, 0.0));
        assert_eq!(coords(h.dx_cols().next().unwrap()), (1.0, 0.0));
    }

    #[test]
    fn memory_one_evicts() {
        let e = Euclidean::vector(2);
        let mut x = e.point(v2(0.0, 0.0)).unwrap();
        let mut h = HistoryBuffer::new(x.clone(), 1).unwrap();
        for i in 0..3 {
            let s = e.tangent(&x, v2(1.0, i as f64));
            let r = e.tangent(&x, v2(0.0, 1.0));
            let y = e.retract(&x, &s).unwrap();
            let ry = e.tangent(&y, v2(1.0, 1.0));
            h.advance(&e, &y, &s, &r, &ry).unwrap();
            assert_eq!(h.len(), 1);
            assert_eq!(coords(h.dx_cols().next().unwrap()), (1.0, i as f64));
            x = y;
        }
    }

    #[test]
    fn advance_rejects_foreign_tangents() {
        let e = Euclidean::vector(2);
        let x0 = e.point(v2(0.0, 0.0)).unwrap();
        let other = e.point(v2(1.0, 0.0)).unwrap();
        let mut h = HistoryBuffer::new(x0.clone(), 2).unwrap();
        let step = e.tangent(&other, v2(1.0, 0.0));
        let r = e.tangent(&x0, v2(1.0, 0.0));
        let x1 = e.retract(&x0, &e.tangent(&x0, v2(1.0, 0.0))).unwrap();
        let r1 = e.tangent(&x1, v2(1.0, 0.0));
        assert!(matches!(h.advance(&e, &x1, &step, &r, &r1), Err(Error::BaseMismatch)));
    }

    #[test]
    fn advance_transports_on_sphere() {
        let s = Oblique::sphere(3);
        let mut rng = seeded_rng(3);
        let mut x = s.random_point(&mut rng);
        let mut h = HistoryBuffer::new(x.clone(), 2).unwrap();
        for _ in 0..5 {
            let step = s.random_tangent(&x, &mut rng).scaled(0.1);
            let r = s.random_tangent(&x, &mut rng);
            let y = s.retract(&x, &step).unwrap();
            let ry = s.random_tangent(&y, &mut rng);
            h.advance(&s, &y, &step, &r, &ry).unwrap();
            for c in h.dx_cols().chain(h.dr_cols()) {
                assert!(c.is_based_at(&y));
                assert!(c.coords().dot(y.repr()).abs() < 1e-14);
            }
            x = y;
        }
        assert_eq!(h.len(), 2);
    }

    #[test]
    fn gamma_scalar_least_squares() {
        let (e, h) = flat_history((0.5, 0.5), (1.0, 1.0));
        let r = e.tangent(h.base(), v2(1.0, 0.0));
        let sol = solve_gamma(&h, &e, &r, 0.0).unwrap();
        assert_abs_diff_eq!(sol.gamma[0], 0.5, epsilon = 1e-15);
        let (a, b) = coords(&sol.rbar);
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.theta, 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn gamma_regularized_scalar() {
        let (e, h) = flat_history((0.5, 0.5), (1.0, 1.0));
        let r = e.tangent(h.base(), v2(1.0, 0.0));
        let sol = solve_gamma(&h, &e, &r, 1.0).unwrap();
        assert_abs_diff_eq!(sol.gamma[0], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn orthogonal_residual_gives_zero_gamma() {
        let (e, h) = flat_history((1.0, 0.0), (0.0, 1.0));
        let r = e.tangent(h.base(), v2(1.0, 0.0));
        let sol = solve_gamma(&h, &e, &r, 0.0).unwrap();
        assert_eq!(sol.gamma[0], 0.0);
        assert_eq!(coords(&sol.rbar), (1.0, 0.0));
        assert_eq!(sol.theta, 1.0);
    }

    #[test]
    fn zero_history_falls_back_to_zero_gamma() {
        let (e, h) = flat_history((0.0, 0.0), (0.0, 0.0));
        let r = e.tangent(h.base(), v2(1.0, 2.0));
        let sol = solve_gamma(&h, &e, &r, 0.0).unwrap();
        assert!(sol.zeroed);
        assert_eq!(sol.gamma[0], 0.0);
        assert_eq!(sol.theta, 1.0);
    }

    #[test]
    fn ram_direction_examples() {
        let (e, h) = flat_history((0.5, 0.5), (1.0, 1.0));
        let r = e.tangent(h.base(), v2(1.0, 0.0));
        let sol = solve_gamma(&h, &e, &r, 0.0).unwrap();
        let d = ram_direction(&h, &sol.rbar, &sol.gamma, 0.6);
        let (a, b) = coords(&d);
        assert_abs_diff_eq!(a, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(b, -0.55, epsilon = 1e-15);

        let d0 = ram_direction(&h, &r, &DVector::zeros(1), 0.6);
        assert_eq!(coords(&d0), (0.6, 0.0));
    }

    #[test]
    fn pure_extrapolation_when_residual_in_span() {
        let (e, h) = flat_history((0.3, -0.2), (2.0, 0.0));
        let r = e.tangent(h.base(), v2(1.0, 0.0));
        let sol = solve_gamma(&h, &e, &r, 0.0).unwrap();
        assert_eq!(sol.theta, 0.0);
        let d = ram_direction(&h, &sol.rbar, &sol.gamma, 1.0);
        assert_eq!(coords(&d), (-0.15, 0.1));
    }

    #[test]
    fn rram_direction_endpoints_and_midpoint() {
        let (e, h) = flat_history((0.5, 0.5), (1.0, 1.0));
        let r = e.tangent(h.base(), v2(1.0, 0.0));
        let sol = solve_gamma(&h, &e, &r, 0.0).unwrap();
        let d0 = rram_direction(&h, &r, &sol.gamma, 0.0, 0.6);
        assert_eq!(coords(&d0), (0.6, 0.0));
        let d1 = rram_direction(&h, &r, &sol.gamma, 1.0, 0.6);
        let am = ram_direction(&h, &sol.rbar, &sol.gamma, 0.6);
        assert_eq!(d1.coords(), am.coords());
        let dh = rram_direction(&h, &r, &sol.gamma, 0.5, 0.6);
        let want = (d0.coords() + am.coords()) * 0.5;
        assert!((dh.coords() - want).norm() < 1e-15);
    }

    #[test]
    fn alpha_rules() {
        let (e, h) = flat_history((0.5, 0.5), (1.0, 1.0));
        let x = h.base().clone();
        let g = e.tangent(&x, v2(1.0, 0.0));
        let down = e.tangent(&x, v2(-1.0, 0.0));
        let up = e.tangent(&x, v2(1.0, 0.0));
        let pick = |mode, d: &TangentOf<Flat>| choose_alpha(mode, &e, &h, &g, d, 0.6, 1e-7).unwrap().alpha;
        assert_eq!(pick(AlphaMode::DescentCheck, &down), 1.0);
        assert_eq!(pick(AlphaMode::DescentCheck, &up), 0.0);
        assert_eq!(pick(AlphaMode::Fixed(1.7), &up), 1.0);
        assert_eq!(pick(AlphaMode::Fixed(-0.2), &up), 0.0);
    }

    #[test]
    fn exact_bound_alpha_formula() {
        assert_abs_diff_eq!(alpha_bound(2.0, 0.6, 0.5), 0.3, epsilon = 1e-15);
        assert_eq!(alpha_bound(-1.0, 0.6, 0.5), 1.0);
        // projector history: E + E* = 2βP
        let (e, h) = flat_history((0.0, 0.0), (1.0, 0.0));
        let g = e.tangent(h.base(), v2(1.0, 0.0));
        let c = choose_alpha(AlphaMode::ExactBound { mu: 0.5 }, &e, &h, &g, &g, 0.6, 1e-9).unwrap();
        assert_abs_diff_eq!(c.lambda_k.unwrap(), 1.2, epsilon = 1e-9);
        let (e, h) = flat_history((0.0, 0.0), (1.0, 0.0));
        let c = choose_alpha(AlphaMode::ExactBound { mu: 0.5 }, &e, &h, &g, &g, 1.0, 1e-9).unwrap();
        assert_abs_diff_eq!(c.lambda_k.unwrap(), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.alpha, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn lambda_of_rank_one_projector() {
        // E is the orthogonal projector onto Δr, so E + E* = 2P
        let (e, h) = flat_history((0.0, 0.0), (1.0, 0.0));
        assert_abs_diff_eq!(lambda_max_sym(&h, &e, 1.0, 1e-12).unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn lambda_of_zero_history_is_error() {
        let (e, h) = flat_history((0.0, 0.0), (0.0, 0.0));
        assert!(lambda_max_sym(&h, &e, 1.0, 1e-3).is_err());
    }

    #[test]
    fn lambda_matches_dense_operator() {
        let e = Euclidean::vector(6);
        let mut rng = seeded_rng(8);
        let x = e.random_point(&mut rng);
        let dx: Vec<_> = (0..3).map(|_| e.random_tangent(&x, &mut rng)).collect();
        let dr: Vec<_> = (0..3).map(|_| e.random_tangent(&x, &mut rng)).collect();
        let xm = DMatrix::from_fn(6, 3, |i, j| dx[j].coords()[i]);
        let rm = DMatrix::from_fn(6, 3, |i, j| dr[j].coords()[i]);
        let h = HistoryBuffer::from_columns(x, 3, dx, dr).unwrap();
        let (beta, delta) = (0.7, 0.3);
        let kinv = (rm.transpose() * &rm + xm.transpose() * &xm * delta).try_inverse().unwrap();
        let op = (&xm + &rm * beta) * kinv * rm.transpose();
        let want = sym_eig(&(&op + op.transpose())).unwrap().max();
        assert_abs_diff_eq!(lambda_max_sym(&h, &e, beta, delta).unwrap(), want, epsilon = 1e-10);
    }

    #[test]
    fn delta_examples() {
        assert_abs_diff_eq!(adaptive_delta(1e-3, Some(1e-2), 1e-7), 1e-8, epsilon = 1e-22);
        assert_eq!(adaptive_delta(5.0, None, 1e-7), 1e-7);
        assert_eq!(adaptive_delta(5.0, Some(0.0), 1e-7), 1e-7);
    }

    #[test]
    fn config_validation() {
        assert!(MixingConfig::ram().validate().is_ok());
        let bad = MixingConfig {
            beta: 0.0,
            ..MixingConfig::ram()
        };
        assert!(bad.validate().is_err());
        let bad = MixingConfig {
            memory: 0,
            ..MixingConfig::ram()
        };
        assert!(bad.validate().is_err());
        let bad = MixingConfig {
            alpha_mode: AlphaMode::ExactBound { mu: 1.0 },
            ..MixingConfig::rram()
        };
        assert!(bad.validate().is_err());
    }

    fn diag_rayleigh(n: usize) -> ProblemInstance<Oblique> {
        let d = DVector::from_fn(n, |i, _| 1.0 + i as f64);
        rayleigh_problem(DMatrix::from_diagonal(&d)).unwrap()
    }

    #[test]
    fn zero_gradient_start_converges_immediately() {
        let p = diag_rayleigh(4);
        let mut e1 = DMatrix::zeros(4, 1);
        e1[0] = 1.0;
        let x0 = p.manifold.point(e1).unwrap();
        let rep = run_mixing(&p, &x0, &MixingConfig::ram()).unwrap();
        assert_eq!(rep.status, Status::Converged);
        assert_eq!(rep.iterations(), 0);
        assert_eq!(rep.trace.len(), 1);
    }

    #[test]
    fn first_step_is_fixed_point_step() {
        let p = diag_rayleigh(6);
        let mut rng = seeded_rng(2);
        let x0 = p.manifold.random_point(&mut rng);
        let cfg = MixingConfig {
            max_iter: 1,
            scale: 0.1,
            ..MixingConfig::ram()
        };
        let rep = run_mixing(&p, &x0, &cfg).unwrap();
        let g = p.gradient(&x0).unwrap();
        let x1 = p.manifold.retract(&x0, &g.scaled(-0.1)).unwrap();
        assert_eq!(rep.x.repr(), x1.repr());
        assert_eq!(rep.status, Status::MaxIter);
    }

    #[test]
    fn ram_and_rram_converge_on_sphere() {
        let p = diag_rayleigh(10);
        let mut rng = seeded_rng(5);
        let x0 = p.manifold.random_point(&mut rng);
        for cfg in [MixingConfig::ram(), MixingConfig::rram()] {
            let cfg = MixingConfig { scale: 0.1, ..cfg };
            let rep = run_mixing(&p, &x0, &cfg).unwrap();
            assert_eq!(rep.status, Status::Converged, "{:?}", cfg.variant);
            assert!(rep.trace.iter().all(|r| r.theta.is_none_or(|t| t <= 1.0 + 1e-12)));
            let elapsed: Vec<f64> = rep.trace.iter().map(|r| r.elapsed_s).collect();
            assert!(elapsed.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn rram_reduces_to_ram_bitwise() {
        let p = diag_rayleigh(12);
        let mut rng = seeded_rng(9);
        let x0 = p.manifold.random_point(&mut rng);
        let ram = MixingConfig {
            scale: 0.05,
            ..MixingConfig::ram()
        };
        let rram = MixingConfig {
            variant: Variant::Rram,
            alpha_mode: AlphaMode::Fixed(1.0),
            delta_mode: DeltaMode::Fixed(0.0),
            ..ram.clone()
        };
        let a = run_mixing(&p, &x0, &ram).unwrap();
        let b = run_mixing(&p, &x0, &rram).unwrap();
        assert_eq!(a.trace.len(), b.trace.len());
        for (ra, rb) in a.trace.iter().zip(&b.trace) {
            assert_eq!(ra.numeric_key()[..6], rb.numeric_key()[..6]);
        }
        assert_eq!(a.x.repr(), b.x.repr());
    }

    proptest! {
        #[test]
        fn theta_never_exceeds_one(
            seed in 0u64..10_000,
            m in 1usize..5,
            delta in prop_oneof![Just(0.0), 1e-10f64..1.0],
        ) {
            let s = Oblique::new(4, 3).unwrap();
            let mut rng = seeded_rng(seed);
            let x = s.random_point(&mut rng);
            let dx: Vec<_> = (0..m).map(|_| s.random_tangent(&x, &mut rng)).collect();
            let dr: Vec<_> = (0..m).map(|_| s.random_tangent(&x, &mut rng)).collect();
            let h = HistoryBuffer::from_columns(x.clone(), 5, dx, dr).unwrap();
            let r = s.random_tangent(&x, &mut rng);
            let sol = solve_gamma(&h, &s, &r, delta).unwrap();
            prop_assert!(sol.theta <= 1.0 + 1e-12);
            // optimality: the regularized objective is no larger than at Γ = 0
            let xg = ram_direction(&h, &r.zeros_like(), &sol.gamma, 0.0);
            let obj = s.inner(&x, &sol.rbar, &sol.rbar).unwrap() + delta * s.inner(&x, &xg, &xg).unwrap();
            prop_assert!(obj <= s.inner(&x, &r, &r).unwrap() * (1.0 + 1e-12));
        }

        #[test]
        fn history_never_exceeds_capacity(cap in 1usize..5, steps in 0usize..12) {
            let e = Euclidean::vector(3);
            let mut rng = seeded_rng(cap as u64 * 100 + steps as u64);
            let mut x = e.random_point(&mut rng);
            let mut h = HistoryBuffer::new(x.clone(), cap).unwrap();
            for _ in 0..steps {
                let s = e.random_tangent(&x, &mut rng);
                let r = e.random_tangent(&x, &mut rng);
                let y = e.retract(&x, &s).unwrap();
                let ry = e.random_tangent(&y, &mut rng);
                h.advance(&e, &y, &s, &r, &ry).unwrap();
                x = y;
                prop_assert!(h.len() <= cap);
                prop_assert_eq!(h.base().id(), x.id());
                prop_assert!(h.dx_cols().chain(h.dr_cols()).all(|c| c.is_based_at(&x)));
            }
            prop_assert_eq!(h.len(), steps.min(cap));
        }
    }
}
