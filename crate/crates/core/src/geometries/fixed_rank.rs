use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::frob_dot;
use crate::error::{Error, Result};
use crate::linalg::{thin_qr, thin_svd};
use crate::manifold::{Manifold, TangentVector};
use crate::random::{gaussian_matrix, uniform};

/// Rank-`k` matrix `U diag(s) Vᵀ` with orthonormal `U`, `V` and `s` positive, descending.
#[derive(Debug, Clone)]
pub struct FixedRankPoint {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl FixedRankPoint {
    /// `U diag(s)`, handy for sampling entries.
    pub fn us(&self) -> DMatrix<f64> {
        let mut out = self.u.clone();
        for (j, mut c) in out.column_iter_mut().enumerate() {
            c *= self.s[j];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.us() * self.v.transpose()
    }

    /// Best rank-`k` approximation of a dense matrix.
    pub fn from_dense(a: &DMatrix<f64>, k: usize) -> Result<Self> {
        let svd = thin_svd(a)?;
        if k > svd.s.len() {
            return Err(Error::InvalidInput(format!(
                "rank {k} exceeds min dimension {}",
                svd.s.len()
            )));
        }
        Ok(FixedRankPoint {
            u: svd.u.columns(0, k).into_owned(),
            s: svd.s.rows(0, k).into_owned(),
            v: svd.v.columns(0, k).into_owned(),
        })
    }
}

/// Tangent vector `U M Vᵀ + U_p Vᵀ + U V_pᵀ` stored as `(M, U_p, V_p)` with
/// `Uᵀ U_p = 0` and `Vᵀ V_p = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedRankTangent {
    pub m: DMatrix<f64>,
    pub up: DMatrix<f64>,
    pub vp: DMatrix<f64>,
}

impl TangentVector for FixedRankTangent {
    fn scale_mut(&mut self, a: f64) {
        self.m *= a;
        self.up *= a;
        self.vp *= a;
    }

    fn axpy_mut(&mut self, a: f64, x: &Self) {
        self.m.axpy_mut(a, &x.m);
        self.up.axpy_mut(a, &x.up);
        self.vp.axpy_mut(a, &x.vp);
    }

    fn zeros_like(&self) -> Self {
        FixedRankTangent {
            m: self.m.zeros_like(),
            up: self.up.zeros_like(),
            vp: self.vp.zeros_like(),
        }
    }
}

/// Sparse matrix in coordinate form (entries sorted by `(row, col)`).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseMatrix {
    /// `A B` for dense `B` with `ncols` rows.
    pub fn mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let k = b.ncols();
        let bt = b.transpose();
        let mut out_t = DMatrix::zeros(k, self.nrows);
        for ((&i, &j), &a) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
            let mut dst = out_t.column_mut(i);
            dst.axpy(a, &bt.column(j), 1.0);
        }
        out_t.transpose()
    }

    /// `Aᵀ B` for dense `B` with `nrows` rows.
    pub fn tr_mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let k = b.ncols();
        let bt = b.transpose();
        let mut out_t = DMatrix::zeros(k, self.ncols);
        for ((&i, &j), &a) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
            let mut dst = out_t.column_mut(j);
            dst.axpy(a, &bt.column(i), 1.0);
        }
        out_t.transpose()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for ((&i, &j), &a) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
            out[(i, j)] += a;
        }
        out
    }
}

/// Euclidean gradient on the fixed-rank manifold: dense or sparse.
#[derive(Debug, Clone)]
pub enum FixedRankAmbient {
    Dense(DMatrix<f64>),
    Sparse(SparseMatrix),
}

impl FixedRankAmbient {
    fn mul(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            FixedRankAmbient::Dense(a) => a * b,
            FixedRankAmbient::Sparse(a) => a.mul_dense(b),
        }
    }

    fn tr_mul(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            FixedRankAmbient::Dense(a) => a.tr_mul(b),
            FixedRankAmbient::Sparse(a) => a.tr_mul_dense(b),
        }
    }
}

/// Manifold of `n × m` matrices of rank exactly `k`, embedded metric,
/// retraction by metric projection (truncated SVD), projection transport.
#[derive(Debug, Clone)]
pub struct FixedRank {
    n: usize,
    m: usize,
    k: usize,
}

impl FixedRank {
    pub fn new(n: usize, m: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n.min(m) {
            return Err(Error::InvalidInput(format!(
                "fixed-rank manifold needs 1 <= k <= min(n, m) (got n={n}, m={m}, k={k})"
            )));
        }
        Ok(FixedRank { n, m, k })
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    fn project_factors(&self, x: &FixedRankPoint, av: DMatrix<f64>, atu: DMatrix<f64>) -> FixedRankTangent {
        let m = x.u.tr_mul(&av);
        let up = av - &x.u * &m;
        let vp = atu - &x.v * m.transpose();
        FixedRankTangent { m, up, vp }
    }

    /// `(Z V_y, Zᵀ U_y)` for the ambient matrix `Z` represented by tangent `t` at `x`.
    fn apply_tangent(
        &self,
        x: &FixedRankPoint,
        t: &FixedRankTangent,
        uy: &DMatrix<f64>,
        vy: &DMatrix<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let vtvy = x.v.tr_mul(vy);
        let utuy = x.u.tr_mul(uy);
        let zv = &x.u * (&t.m * &vtvy) + &t.up * &vtvy + &x.u * t.vp.tr_mul(vy);
        let ztu = &x.v * (t.m.tr_mul(&utuy)) + &x.v * t.up.tr_mul(uy) + &t.vp * &utuy;
        (zv, ztu)
    }
}

impl Manifold for FixedRank {
    type Repr = FixedRankPoint;
    type Vector = FixedRankTangent;
    type Ambient = FixedRankAmbient;

    fn name(&self) -> &'static str {
        "fixed-rank"
    }

    fn dims(&self) -> Vec<usize> {
        vec![self.n, self.m]
    }

    fn intrinsic_dim(&self) -> usize {
        (self.n + self.m - self.k) * self.k
    }

    fn validate(&self, x: &FixedRankPoint) -> Result<()> {
        let k = self.k;
        if x.u.shape() != (self.n, k) || x.v.shape() != (self.m, k) || x.s.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "fixed-rank factors must be U {}x{k}, s {k}, V {}x{k}",
                self.n, self.m
            )));
        }
        let eye = DMatrix::identity(k, k);
        let du = (x.u.tr_mul(&x.u) - &eye).norm();
        let dv = (x.v.tr_mul(&x.v) - &eye).norm();
        if !(du <= 1e-10 && dv <= 1e-10) {
            return Err(Error::Infeasible(format!(
                "factor orthonormality deviation U {du:e}, V {dv:e}"
            )));
        }
        if !x.s.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(Error::Infeasible("singular values must be positive".into()));
        }
        if x.s.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Infeasible("singular values must be descending".into()));
        }
        Ok(())
    }

    fn inner_at(&self, _x: &FixedRankPoint, a: &FixedRankTangent, b: &FixedRankTangent) -> f64 {
        frob_dot(&a.m, &b.m) + frob_dot(&a.up, &b.up) + frob_dot(&a.vp, &b.vp)
    }

    fn proj_at(&self, x: &FixedRankPoint, a: &FixedRankAmbient) -> FixedRankTangent {
        self.project_factors(x, a.mul(&x.v), a.tr_mul(&x.u))
    }

    fn retract_at(&self, x: &FixedRankPoint, t: &FixedRankTangent) -> Result<FixedRankPoint> {
        let k = self.k;
        if t.m.iter().chain(t.up.iter()).chain(t.vp.iter()).all(|&c| c == 0.0) {
            return Ok(x.clone());
        }
        // X + ξ = [U Q_u] [[S + M, R_vᵀ], [R_u, 0]] [V Q_v]ᵀ
        let (qu, ru) = thin_qr(&t.up)?;
        let (qv, rv) = thin_qr(&t.vp)?;
        let mut core = DMatrix::zeros(2 * k, 2 * k);
        let mut sm = t.m.clone();
        for i in 0..k {
            sm[(i, i)] += x.s[i];
        }
        core.view_mut((0, 0), (k, k)).copy_from(&sm);
        core.view_mut((0, k), (k, k)).copy_from(&rv.transpose());
        core.view_mut((k, 0), (k, k)).copy_from(&ru);
        let svd = thin_svd(&core)?;
        let top = svd.s[0].max(f64::MIN_POSITIVE);
        let sk = svd.s[k - 1];
        if !(sk > 1e-14 * top) {
            return Err(Error::Retraction(format!(
                "X + xi has rank below {k} (sigma_k = {sk:e})"
            )));
        }
        if let Some(&next) = svd.s.as_slice().get(k) {
            if sk - next <= 1e-12 * top {
                return Err(Error::Retraction(format!(
                    "truncation to rank {k} is ambiguous (sigma_k = {sk:e}, sigma_k+1 = {next:e})"
                )));
            }
        }
        let mut bu = DMatrix::zeros(self.n, 2 * k);
        bu.view_mut((0, 0), (self.n, k)).copy_from(&x.u);
        bu.view_mut((0, k), (self.n, k)).copy_from(&qu);
        let mut bv = DMatrix::zeros(self.m, 2 * k);
        bv.view_mut((0, 0), (self.m, k)).copy_from(&x.v);
        bv.view_mut((0, k), (self.m, k)).copy_from(&qv);
        let u = bu * svd.u.columns(0, k);
        let v = bv * svd.v.columns(0, k);
        // re-orthonormalize away round-off drift; the triangular factors are ~I
        let (u, ru2) = thin_qr(&u)?;
        let (v, rv2) = thin_qr(&v)?;
        let core2 = ru2 * DMatrix::from_diagonal(&svd.s.rows(0, k).into_owned()) * rv2.transpose();
        let inner = thin_svd(&core2)?;
        Ok(FixedRankPoint {
            u: u * inner.u,
            s: inner.s,
            v: v * inner.v,
        })
    }

    fn transport_at(
        &self,
        x: &FixedRankPoint,
        y: &FixedRankPoint,
        t: &FixedRankTangent,
    ) -> Result<FixedRankTangent> {
        let (zv, ztu) = self.apply_tangent(x, t, &y.u, &y.v);
        Ok(self.project_factors(y, zv, ztu))
    }

    fn egrad_to_rgrad_at(&self, x: &FixedRankPoint, g: &FixedRankAmbient) -> FixedRankTangent {
        self.proj_at(x, g)
    }

    fn zero_at(&self, _x: &FixedRankPoint) -> FixedRankTangent {
        FixedRankTangent {
            m: DMatrix::zeros(self.k, self.k),
            up: DMatrix::zeros(self.n, self.k),
            vp: DMatrix::zeros(self.m, self.k),
        }
    }

    fn isometric_coords(&self, _x: &FixedRankPoint, t: &FixedRankTangent) -> DVector<f64> {
        DVector::from_iterator(
            t.m.len() + t.up.len() + t.vp.len(),
            t.m.iter().chain(t.up.iter()).chain(t.vp.iter()).copied(),
        )
    }

    fn embed_point(&self, x: &FixedRankPoint) -> DMatrix<f64> {
        x.to_dense()
    }

    fn embed_tangent(&self, x: &FixedRankPoint, t: &FixedRankTangent) -> DMatrix<f64> {
        &x.u * &t.m * x.v.transpose() + &t.up * x.v.transpose() + &x.u * t.vp.transpose()
    }

    fn ambient_from_dense(&self, a: DMatrix<f64>) -> FixedRankAmbient {
        FixedRankAmbient::Dense(a)
    }

    fn random_repr(&self, rng: &mut dyn RngCore) -> FixedRankPoint {
        let u = thin_qr(&gaussian_matrix(self.n, self.k, rng)).expect("finite").0;
        let v = thin_qr(&gaussian_matrix(self.m, self.k, rng)).expect("finite").0;
        let mut s: Vec<f64> = (0..self.k).map(|_| uniform(0.5, 1.5, rng)).collect();
        s.sort_by(|a, b| b.total_cmp(a));
        FixedRankPoint {
            u,
            s: DVector::from_vec(s),
            v,
        }
    }

    fn random_vector_at(&self, x: &FixedRankPoint, rng: &mut dyn RngCore) -> FixedRankTangent {
        let m = gaussian_matrix(self.k, self.k, rng);
        let g1 = gaussian_matrix(self.n, self.k, rng);
        let g2 = gaussian_matrix(self.m, self.k, rng);
        let up = &g1 - &x.u * x.u.tr_mul(&g1);
        let vp = &g2 - &x.v * x.v.tr_mul(&g2);
        FixedRankTangent { m, up, vp }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn e1e1() -> FixedRankPoint {
        FixedRankPoint {
            u: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            s: DVector::from_vec(vec![1.0]),
            v: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        }
    }

    #[test]
    fn retract_matches_best_rank_one() {
        let fr = FixedRank::new(2, 2, 1).unwrap();
        let x = fr.point(e1e1()).unwrap();
        // ambient e2 e1ᵀ = U_p Vᵀ with U_p = e2
        let t = FixedRankTangent {
            m: DMatrix::zeros(1, 1),
            up: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            vp: DMatrix::zeros(2, 1),
        };
        let xi = fr.tangent(&x, t);
        let y = fr.retract(&x, &xi).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(y.repr().to_dense(), want, epsilon = 1e-14);
        assert_abs_diff_eq!(y.repr().s[0], 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn proj_of_point_itself() {
        let fr = FixedRank::new(5, 4, 2).unwrap();
        let mut rng = crate::random::seeded_rng(4);
        let x = fr.random_point(&mut rng);
        let a = FixedRankAmbient::Dense(x.repr().to_dense());
        let p = fr.proj(&x, &a);
        let s = DMatrix::from_diagonal(&x.repr().s);
        assert_abs_diff_eq!(p.coords().m, s, epsilon = 1e-13);
        assert!(p.coords().up.norm() < 1e-13);
        assert!(p.coords().vp.norm() < 1e-13);
    }

    #[test]
    fn zero_step_is_identity() {
        let fr = FixedRank::new(5, 4, 2).unwrap();
        let mut rng = crate::random::seeded_rng(5);
        let x = fr.random_point(&mut rng);
        let y = fr.retract(&x, &fr.zero_tangent(&x)).unwrap();
        assert_eq!(y.repr().to_dense(), x.repr().to_dense());
    }

    #[test]
    fn retraction_equals_dense_truncated_svd() {
        let fr = FixedRank::new(9, 7, 3).unwrap();
        let mut rng = crate::random::seeded_rng(6);
        for _ in 0..30 {
            let x = fr.random_point(&mut rng);
            let t = fr.random_tangent(&x, &mut rng).scaled(0.3);
            let y = fr.retract(&x, &t).unwrap();
            fr.validate(y.repr()).unwrap();
            let dense = fr.embed_point(x.repr()) + fr.embed_tangent(x.repr(), t.coords());
            let oracle = FixedRankPoint::from_dense(&dense, 3).unwrap();
            assert_abs_diff_eq!(y.repr().to_dense(), oracle.to_dense(), epsilon = 1e-12);
        }
    }

    #[test]
    fn sparse_products_match_dense() {
        let a = SparseMatrix {
            nrows: 3,
            ncols: 4,
            rows: vec![0, 1, 2, 2],
            cols: vec![1, 3, 0, 2],
            vals: vec![2.0, -1.0, 0.5, 3.0],
        };
        let mut rng = crate::random::seeded_rng(7);
        let b = gaussian_matrix(4, 2, &mut rng);
        let c = gaussian_matrix(3, 2, &mut rng);
        assert_abs_diff_eq!(a.mul_dense(&b), a.to_dense() * &b, epsilon = 1e-14);
        assert_abs_diff_eq!(a.tr_mul_dense(&c), a.to_dense().transpose() * &c, epsilon = 1e-14);
    }

    #[test]
    fn transport_equals_dense_projection() {
        let fr = FixedRank::new(6, 5, 2).unwrap();
        let mut rng = crate::random::seeded_rng(9);
        let x = fr.random_point(&mut rng);
        let d = fr.random_tangent(&x, &mut rng).scaled(0.2);
        let u = fr.random_tangent(&x, &mut rng);
        let (y, tu) = fr.transport(&x, &d, &u).unwrap();
        let dense_u = fr.embed_tangent(x.repr(), u.coords());
        let direct = fr.proj(&y, &FixedRankAmbient::Dense(dense_u));
        assert_abs_diff_eq!(tu.coords().m, direct.coords().m, epsilon = 1e-12);
        assert_abs_diff_eq!(tu.coords().up, direct.coords().up, epsilon = 1e-12);
        assert_abs_diff_eq!(tu.coords().vp, direct.coords().vp, epsilon = 1e-12);
    }

    #[test]
    fn rank_too_large_rejected() {
        assert!(FixedRank::new(3, 2, 3).is_err());
    }
}
