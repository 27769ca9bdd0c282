//! Independent oracles and numerical probes for the geometries, the
//! objectives and the mixing subproblem.
//!
//! Every probe is deterministic given its seed. Negative controls run a probe
//! on deliberately broken inputs and are expected to fail.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::baselines::fixed_point_step;
use crate::error::{Error, Result};
use crate::geometries::{Euclidean, FixedRank, FixedRankPoint, Oblique, Spd, SpdPoint, Stiefel};
use crate::linalg::thin_qr;
use crate::manifold::{Manifold, PointOf, TangentOf};
use crate::mixing::{solve_gamma, HistoryBuffer};
use crate::parallel::map_jobs;
use crate::problems::{
    brockett_problem, gen_brockett, gen_matcomp, gen_maxcut, gen_spd_set, karcher_problem, matcomp_problem,
    maxcut_problem, MatCompData, ProblemInstance,
};
use crate::random::{seeded_rng, uniform};

/// Outcome of one probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: String,
    pub samples: usize,
    pub max_error: f64,
    pub threshold: f64,
    /// `max_error <= threshold`.
    pub passed: bool,
    /// The probe ran on corrupted inputs and is expected to fail.
    pub negative_control: bool,
    /// The probe does not apply to the geometry.
    pub skipped: bool,
    pub detail: String,
}

impl ProbeReport {
    pub fn new(probe: impl Into<String>, samples: usize, max_error: f64, threshold: f64) -> Self {
        ProbeReport {
            probe: probe.into(),
            samples,
            max_error,
            threshold,
            passed: max_error <= threshold,
            negative_control: false,
            skipped: false,
            detail: String::new(),
        }
    }

    pub fn skipped(probe: impl Into<String>, reason: impl Into<String>) -> Self {
        ProbeReport {
            probe: probe.into(),
            samples: 0,
            max_error: 0.0,
            threshold: 0.0,
            passed: true,
            negative_control: false,
            skipped: true,
            detail: reason.into(),
        }
    }

    fn failed(probe: impl Into<String>, err: &Error) -> Self {
        let mut r = ProbeReport::new(probe, 0, f64::INFINITY, 0.0);
        r.detail = err.to_string();
        r
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    fn control(mut self) -> Self {
        self.negative_control = true;
        self.probe = format!("{} (negative control)", self.probe);
        self
    }

    /// Passed, or failed as a negative control should, or not applicable.
    pub fn ok(&self) -> bool {
        self.skipped || self.passed != self.negative_control
    }
}

fn unit_tangent<M: Manifold>(man: &M, x: &PointOf<M>, rng: &mut dyn RngCore) -> Result<TangentOf<M>> {
    let u = man.random_tangent(x, rng);
    let n = man.norm(x, &u)?;
    if n == 0.0 {
        return Ok(u);
    }
    Ok(u.scaled(1.0 / n))
}

// ---------------------------------------------------------------- gradients

/// Compare `⟨grad f, u⟩` with central differences along retraction curves
/// for unit `u`; the error is relative to `max(‖grad f‖, |fd|)`. `h`
/// defaults to `1e-6·(1 + ‖x‖)`.
pub fn fd_gradient_check<M: Manifold>(
    problem: &ProblemInstance<M>,
    x: &PointOf<M>,
    directions: usize,
    h: Option<f64>,
    seed: u64,
) -> Result<ProbeReport> {
    let g = problem.gradient(x)?;
    fd_check_against(problem, x, &g, directions, h, seed)
}

fn fd_check_against<M: Manifold>(
    problem: &ProblemInstance<M>,
    x: &PointOf<M>,
    g: &TangentOf<M>,
    directions: usize,
    h: Option<f64>,
    seed: u64,
) -> Result<ProbeReport> {
    let man = &problem.manifold;
    let h = h.unwrap_or_else(|| 1e-6 * (1.0 + man.embed_point(x.repr()).norm()));
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be > 0, got {h}")));
    }
    let gnorm = man.norm(x, g)?;
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let u = unit_tangent(man, x, &mut rng)?;
        let fp = problem.cost(&man.retract(x, &u.scaled(h))?)?;
        let fm = problem.cost(&man.retract(x, &u.scaled(-h))?)?;
        let fd = (fp - fm) / (2.0 * h);
        let an = man.inner(x, g, &u)?;
        // errors are measured against the gradient norm so that directions
        // nearly orthogonal to the gradient do not amplify rounding
        let denom = fd.abs().max(gnorm);
        let err = if denom > 0.0 { (fd - an).abs() / denom } else { 0.0 };
        worst = worst.max(err);
    }
    Ok(ProbeReport::new(format!("fd_gradient:{}", problem.meta.name), directions, worst, 1e-5)
        .with_detail(format!("h = {h:e}")))
}

// ------------------------------------------------------------ mixing oracle

/// Reference `Γ` from the stacked least-squares problem `[R; √δ X] Γ ≈ [r; 0]`
/// in isometric coordinates, solved by QR. A ridge is added only when `R` of
/// the factorization has an exactly zero pivot.
pub fn ls_bruteforce<M: Manifold>(
    h: &HistoryBuffer<M>,
    manifold: &M,
    r: &TangentOf<M>,
    delta: f64,
) -> Result<DVector<f64>> {
    let m = h.len();
    if m == 0 || m > 10 {
        return Err(Error::InvalidInput(format!("oracle handles 1..=10 columns, got {m}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("delta must be >= 0, got {delta}")));
    }
    let x = h.base().repr();
    let coords = |v: &TangentOf<M>| manifold.isometric_coords(x, v.coords());
    let rc: Vec<DVector<f64>> = h.dr_cols().map(coords).collect();
    let xc: Vec<DVector<f64>> = h.dx_cols().map(coords).collect();
    let rv = coords(r);
    let n = rv.len();
    let rows = if delta > 0.0 { 2 * n } else { n };
    let sd = delta.sqrt();
    let a = DMatrix::from_fn(rows, m, |i, j| if i < n { rc[j][i] } else { sd * xc[j][i - n] });
    let mut b = DVector::zeros(rows);
    b.rows_mut(0, n).copy_from(&rv);

    let (q, rr) = thin_qr(&a)?;
    if (0..m).all(|i| rr[(i, i)] != 0.0) {
        if let Some(g) = rr.solve_upper_triangular(&q.tr_mul(&b)) {
            return Ok(g);
        }
    }
    let mut k = a.tr_mul(&a);
    let ridge = 1e-12 * (k.trace() / m as f64).max(f64::MIN_POSITIVE);
    for i in 0..m {
        k[(i, i)] += ridge;
    }
    let rhs = a.tr_mul(&b);
    Ok(k.cholesky().map(|c| c.solve(&rhs)).unwrap_or_else(|| DVector::zeros(m)))
}

fn gamma_case<M: Manifold>(man: &M, m: usize, delta: f64, rng: &mut dyn RngCore) -> Result<f64> {
    let x = man.random_point(rng);
    let dx = (0..m).map(|_| man.random_tangent(&x, rng)).collect();
    let dr = (0..m).map(|_| man.random_tangent(&x, rng)).collect();
    let r = man.random_tangent(&x, rng);
    let h = HistoryBuffer::from_columns(x, m, dx, dr)?;
    let fast = solve_gamma(&h, man, &r, delta)?.gamma;
    let slow = ls_bruteforce(&h, man, &r, delta)?;
    let scale = slow.norm();
    let diff = (fast - &slow).norm();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// `solve_gamma` against [`ls_bruteforce`] on random histories over several
/// geometries, `m_k ≤ 5`, `δ ∈ {0, 1e-8, 1e-2}`.
pub fn gamma_oracle_probe(instances: usize, seed: u64) -> Result<ProbeReport> {
    const DELTAS: [f64; 3] = [0.0, 1e-8, 1e-2];
    let errs = map_jobs(instances, |i| -> Result<f64> {
        let mut rng = seeded_rng(seed.wrapping_add(i as u64));
        let m = 1 + i % 5;
        let delta = DELTAS[(i / 5) % 3];
        match (i / 15) % 4 {
            0 => gamma_case(&Oblique::new(6, 3)?, m, delta, &mut rng),
            1 => gamma_case(&Stiefel::new(7, 3)?, m, delta, &mut rng),
            2 => gamma_case(&Spd::new(3)?, m, delta, &mut rng),
            _ => gamma_case(&FixedRank::new(6, 5, 2)?, m, delta, &mut rng),
        }
    });
    let mut worst: f64 = 0.0;
    for e in errs {
        worst = worst.max(e?);
    }
    Ok(ProbeReport::new("gamma_oracle", instances, worst, 1e-8))
}

// --------------------------------------------------------------- geometries

const SCALES: [f64; 7] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1];

/// Least-squares slope of `log e` against `log t`, ignoring values lost in
/// rounding.
fn loglog_slope(ts: &[f64], es: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(es)
        .filter(|(_, &e)| e > 1e-14)
        .map(|(&t, &e)| (t.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Shared driver of the two retraction-order probes: `err(x, v, t)` must
/// decay at least quadratically in `t`.
fn order_probe<M: Manifold>(
    name: String,
    man: &M,
    samples: usize,
    seed: u64,
    err: impl Fn(&PointOf<M>, &TangentOf<M>, f64) -> Result<f64>,
) -> ProbeReport {
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    let mut min_slope = f64::INFINITY;
    let mut exact = 0;
    for _ in 0..samples {
        let x = man.random_point(&mut rng);
        let v = match unit_tangent(man, &x, &mut rng) {
            Ok(v) => v,
            Err(e) => return ProbeReport::failed(name, &e),
        };
        let mut es = Vec::with_capacity(SCALES.len());
        for &t in &SCALES {
            match err(&x, &v, t) {
                Ok(e) => es.push(e),
                Err(Error::Unsupported { op, .. }) => {
                    return ProbeReport::skipped(name, format!("{op} is not available"));
                }
                Err(e) => return ProbeReport::failed(name, &e),
            }
        }
        if es.iter().all(|&e| e <= 1e-12) {
            exact += 1;
            continue;
        }
        match loglog_slope(&SCALES, &es) {
            Some(s) => {
                min_slope = min_slope.min(s);
                worst = worst.max(2.0 - s);
            }
            None => exact += 1,
        }
    }
    let detail = if exact == samples {
        "agreement to rounding at every scale".to_string()
    } else {
        format!("min slope {min_slope:.3}")
    };
    ProbeReport::new(name, samples, worst.max(0.0), 0.1).with_detail(detail)
}

/// `‖R_x(tv) − x − tv‖` in the ambient space is `O(t²)` (first-order agreement).
pub fn retraction_first_order_probe<M: Manifold>(man: &M, samples: usize, seed: u64) -> ProbeReport {
    order_probe(format!("retraction_first_order:{}", man.name()), man, samples, seed, |x, v, t| {
        let y = man.retract(x, &v.scaled(t))?;
        let lin = man.embed_point(x.repr()) + man.embed_tangent(x.repr(), v.coords()) * t;
        Ok((man.embed_point(y.repr()) - lin).norm())
    })
}

/// `dist(R_x(tv), Exp_x(tv))` decays at least quadratically. Geometries
/// without an exponential map or distance are skipped.
pub fn retraction_order_probe<M: Manifold>(man: &M, samples: usize, seed: u64) -> ProbeReport {
    order_probe(format!("retraction_order:{}", man.name()), man, samples, seed, |x, v, t| {
        let tv = v.scaled(t);
        let e = man.exp(x, &tv)?;
        let r = man.retract(x, &tv)?;
        man.dist(&r, &e)
    })
}

type TransportFn<M> = dyn Fn(&M, &PointOf<M>, &PointOf<M>, &TangentOf<M>) -> Result<TangentOf<M>>;

fn transport_probe_with<M: Manifold>(man: &M, samples: usize, seed: u64, parallel: &TransportFn<M>) -> Result<ProbeReport> {
    let name = format!("transport_isometry:{}", man.name());
    let mut rng = seeded_rng(seed);
    let mut iso: f64 = 0.0;
    let mut excess: f64 = 0.0;
    let mut has_parallel = true;
    for _ in 0..samples {
        let x = man.random_point(&mut rng);
        let d = unit_tangent(man, &x, &mut rng)?.scaled(0.5);
        let y = man.retract(&x, &d)?;
        let u = man.random_tangent(&x, &mut rng);
        let nu = man.norm(&x, &u)?;
        if nu == 0.0 {
            continue;
        }
        let tu = man.transport_to(&x, &y, &u)?;
        excess = excess.max(man.norm(&y, &tu)? / nu - 1.0);
        if has_parallel {
            match parallel(man, &x, &y, &u) {
                Ok(pu) => iso = iso.max((man.norm(&y, &pu)? - nu).abs() / nu),
                Err(Error::Unsupported { .. }) => has_parallel = false,
                Err(e) => return Err(e),
            }
        }
    }
    let detail = if has_parallel {
        format!("isometry {iso:e}, norm growth {excess:e}")
    } else {
        format!("boundedness only, norm growth {excess:e}")
    };
    Ok(ProbeReport::new(name, samples, iso.max(excess).max(0.0), 1e-10).with_detail(detail))
}

/// Parallel transport preserves norms; the solver's transport never grows
/// them.
pub fn transport_isometry_probe<M: Manifold>(man: &M, samples: usize, seed: u64) -> Result<ProbeReport> {
    transport_probe_with(man, samples, seed, &|m: &M, x, y, u| m.parallel_transport(x, y, u))
}

/// `T(au + bw) = aTu + bTw`.
pub fn transport_linearity_probe<M: Manifold>(man: &M, samples: usize, seed: u64) -> Result<ProbeReport> {
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = man.random_point(&mut rng);
        let d = unit_tangent(man, &x, &mut rng)?.scaled(0.5);
        let y = man.retract(&x, &d)?;
        let u = man.random_tangent(&x, &mut rng);
        let w = man.random_tangent(&x, &mut rng);
        let (a, b) = (uniform(-2.0, 2.0, &mut rng), uniform(-2.0, 2.0, &mut rng));
        let lhs = man.transport_to(&x, &y, &u.scaled(a).add(&w.scaled(b)))?;
        let tu = man.transport_to(&x, &y, &u)?;
        let tw = man.transport_to(&x, &y, &w)?;
        let rhs = tu.scaled(a).add(&tw.scaled(b));
        let scale = a.abs() * man.norm(&y, &tu)? + b.abs() * man.norm(&y, &tw)?;
        let diff = man.norm(&y, &lhs.sub(&rhs))?;
        worst = worst.max(if scale > 0.0 { diff / scale } else { diff });
    }
    Ok(ProbeReport::new(format!("transport_linearity:{}", man.name()), samples, worst, 1e-12))
}

/// Distance of a representation from the constraint set.
pub trait Feasibility: Manifold {
    fn feasibility_error(&self, x: &Self::Repr) -> f64;
}

impl Feasibility for Oblique {
    fn feasibility_error(&self, x: &DMatrix<f64>) -> f64 {
        x.column_iter().map(|c| (c.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

impl Feasibility for Stiefel {
    fn feasibility_error(&self, x: &DMatrix<f64>) -> f64 {
        (x.tr_mul(x) - DMatrix::identity(x.ncols(), x.ncols())).norm()
    }
}

impl Feasibility for Spd {
    fn feasibility_error(&self, x: &SpdPoint) -> f64 {
        let m = x.matrix();
        let asym = (m - m.transpose()).norm() / m.norm();
        if self.validate(x).is_ok() {
            asym
        } else {
            f64::INFINITY
        }
    }
}

impl Feasibility for FixedRank {
    fn feasibility_error(&self, x: &FixedRankPoint) -> f64 {
        let k = x.s.len();
        let eye = DMatrix::identity(k, k);
        let du = (x.u.tr_mul(&x.u) - &eye).norm();
        let dv = (x.v.tr_mul(&x.v) - &eye).norm();
        if x.s.iter().all(|&s| s > 0.0) {
            du.max(dv)
        } else {
            f64::INFINITY
        }
    }
}

impl Feasibility for Euclidean {
    fn feasibility_error(&self, x: &DMatrix<f64>) -> f64 {
        if x.iter().all(|v| v.is_finite()) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Constraint violation after a chain of `steps` retractions.
pub fn feasibility_drift_probe<M: Feasibility>(man: &M, steps: usize, seed: u64) -> Result<ProbeReport> {
    let mut rng = seeded_rng(seed);
    let mut x = man.random_point(&mut rng);
    let mut worst = man.feasibility_error(x.repr());
    for _ in 0..steps {
        let v = unit_tangent(man, &x, &mut rng)?.scaled(0.3);
        x = man.retract(&x, &v)?;
        worst = worst.max(man.feasibility_error(x.repr()));
    }
    Ok(ProbeReport::new(format!("feasibility_drift:{}", man.name()), steps, worst, 1e-12))
}

/// On the unit sphere `dist(x, R_x(v)) = arctan‖v‖` for the normalization
/// retraction.
pub fn sphere_distance_probe(dim: usize, samples: usize, seed: u64) -> Result<ProbeReport> {
    let man = Oblique::sphere(dim);
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let x = man.random_point(&mut rng);
        let t = 10f64.powf(-2.0 + 3.0 * i as f64 / samples.max(1) as f64);
        let v = unit_tangent(&man, &x, &mut rng)?.scaled(t);
        let y = man.retract(&x, &v)?;
        worst = worst.max((man.dist(&x, &y)? - t.atan()).abs());
    }
    Ok(ProbeReport::new("sphere_distance_identity", samples, worst, 1e-12))
}

/// Largest observed `dist(g(x), g(y)) / dist(x, y)` for the fixed-point map
/// `g(x) = R_x(−λ grad f(x))`, over pairs drawn within `radius` of `x_star`.
pub fn contraction_probe<M: Manifold>(
    problem: &ProblemInstance<M>,
    x_star: &PointOf<M>,
    lambda: f64,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let man = &problem.manifold;
    let mut rng = seeded_rng(seed);
    let near = |rng: &mut dyn RngCore| -> Result<PointOf<M>> {
        let v = unit_tangent(man, x_star, rng)?.scaled(radius * uniform(0.1, 1.0, rng));
        man.retract(x_star, &v)
    };
    let mut kappa: f64 = 0.0;
    for _ in 0..samples {
        let x = near(&mut rng)?;
        let y = near(&mut rng)?;
        let dxy = man.dist(&x, &y)?;
        if dxy == 0.0 {
            continue;
        }
        let gx = fixed_point_step(problem, &x, lambda)?;
        let gy = fixed_point_step(problem, &y, lambda)?;
        kappa = kappa.max(man.dist(&gx, &gy)? / dxy);
    }
    Ok(kappa)
}

// ------------------------------------------------------------------- suites

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Geometry,
    Gradients,
    Oracle,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometry" => Ok(Suite::Geometry),
            "gradients" => Ok(Suite::Gradients),
            "oracle" => Ok(Suite::Oracle),
            "all" => Ok(Suite::All),
            _ => Err(Error::InvalidInput(format!("unknown suite '{s}'"))),
        }
    }
}

fn collect(out: &mut Vec<ProbeReport>, name: &str, r: Result<ProbeReport>) {
    out.push(r.unwrap_or_else(|e| ProbeReport::failed(name, &e)));
}

fn geometry_probes<M: Feasibility>(man: &M, seed: u64, out: &mut Vec<ProbeReport>) {
    let name = man.name();
    out.push(retraction_first_order_probe(man, 10, seed));
    out.push(retraction_order_probe(man, 10, seed + 1));
    collect(out, name, transport_linearity_probe(man, 20, seed + 2));
    collect(out, name, transport_isometry_probe(man, 20, seed + 3));
    collect(out, name, feasibility_drift_probe(man, 200, seed + 4));
}

pub fn geometry_suite(seed: u64) -> Result<Vec<ProbeReport>> {
    let mut out = Vec::new();
    geometry_probes(&Oblique::new(7, 3)?, seed, &mut out);
    geometry_probes(&Oblique::sphere(5), seed + 10, &mut out);
    geometry_probes(&Stiefel::new(8, 3)?, seed + 20, &mut out);
    geometry_probes(&Spd::new(4)?, seed + 30, &mut out);
    geometry_probes(&FixedRank::new(8, 6, 2)?, seed + 40, &mut out);
    geometry_probes(&Euclidean::new(3, 2), seed + 50, &mut out);
    collect(&mut out, "sphere", sphere_distance_probe(4, 30, seed + 60));
    let sphere = Oblique::sphere(5);
    let fake: &TransportFn<Oblique> = &|m, x, y, u| Ok(m.parallel_transport(x, y, u)?.scaled(1.01));
    collect(&mut out, "sphere", transport_probe_with(&sphere, 20, seed + 70, fake).map(ProbeReport::control));
    Ok(out)
}

fn gradient_points<M: Manifold>(p: &ProblemInstance<M>, points: usize, seed: u64, out: &mut Vec<ProbeReport>) {
    let mut rng = seeded_rng(seed);
    let mut worst: Option<ProbeReport> = None;
    for i in 0..points {
        let x = p.manifold.random_point(&mut rng);
        match fd_gradient_check(p, &x, 10, None, seed + 1 + i as u64) {
            Ok(r) => {
                if worst.as_ref().is_none_or(|w| r.max_error > w.max_error) {
                    worst = Some(r);
                }
            }
            Err(e) => {
                out.push(ProbeReport::failed(format!("fd_gradient:{}", p.meta.name), &e));
                return;
            }
        }
    }
    if let Some(mut w) = worst {
        w.samples = points * 10;
        out.push(w.with_detail(format!("{points} points x 10 directions")));
    }
}

pub fn gradient_suite(seed: u64) -> Result<Vec<ProbeReport>> {
    const POINTS: usize = 5;
    let mut out = Vec::new();
    let maxcut = maxcut_problem(&gen_maxcut(40, 0.3, seed)?, 4)?;
    gradient_points(&maxcut, POINTS, seed + 1, &mut out);
    gradient_points(&brockett_problem(gen_brockett(30, seed), 4)?, POINTS, seed + 2, &mut out);
    gradient_points(&karcher_problem(gen_spd_set(6, 4, seed)?)?, POINTS, seed + 3, &mut out);
    let (a, omega) = gen_matcomp(40, 30, 3, seed)?;
    let mc = matcomp_problem(MatCompData::from_dense(&a, &omega)?, 3)?;
    gradient_points(&mc, POINTS, seed + 4, &mut out);

    let x = maxcut.manifold.random_point(&mut seeded_rng(seed + 5));
    let wrong = maxcut.gradient(&x)?.scaled(2.0);
    collect(
        &mut out,
        "fd_gradient:maxcut",
        fd_check_against(&maxcut, &x, &wrong, 10, None, seed + 6).map(ProbeReport::control),
    );
    Ok(out)
}

pub fn oracle_suite(seed: u64) -> Result<Vec<ProbeReport>> {
    let mut out = Vec::new();
    collect(&mut out, "gamma_oracle", gamma_oracle_probe(500, seed));
    // f = log²x on SPD(1) near x* = 1 gives κ = |1 − 2λ|
    let p = karcher_problem(vec![DMatrix::from_element(1, 1, 1.0)])?;
    let x_star = p.manifold.point(SpdPoint::new(DMatrix::from_element(1, 1, 1.0))?)?;
    let lambda = 0.1;
    let r = contraction_probe(&p, &x_star, lambda, 1e-3, 20, seed).map(|k| {
        ProbeReport::new("contraction:spd1", 20, (k - (1.0 - 2.0 * lambda)).abs(), 1e-3)
            .with_detail(format!("estimated {k:.6}"))
    });
    collect(&mut out, "contraction:spd1", r);
    Ok(out)
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<ProbeReport>> {
    Ok(match suite {
        Suite::Geometry => geometry_suite(seed)?,
        Suite::Gradients => gradient_suite(seed)?,
        Suite::Oracle => oracle_suite(seed)?,
        Suite::All => {
            let mut v = geometry_suite(seed)?;
            v.extend(gradient_suite(seed)?);
            v.extend(oracle_suite(seed)?);
            v
        }
    })
}

pub fn all_ok(reports: &[ProbeReport]) -> bool {
    reports.iter().all(ProbeReport::ok)
}

/// Plain-text table, one probe per line.
pub fn format_table(reports: &[ProbeReport]) -> String {
    let width = reports.iter().map(|r| r.probe.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<width$}  {:>7}  {:>10}  {:>9}  status  detail\n", "probe", "samples", "max_error", "threshold");
    for r in reports {
        let status = match (r.skipped, r.ok()) {
            (true, _) => "skip",
            (false, true) => "ok",
            (false, false) => "FAIL",
        };
        s.push_str(&format!(
            "{:<width$}  {:>7}  {:>10.3e}  {:>9.1e}  {:<6}  {}\n",
            r.probe, r.samples, r.max_error, r.threshold, status, r.detail
        ));
    }
    s
}

pub fn to_json(reports: &[ProbeReport]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(|e| Error::InvalidInput(e.to_string()))
}
