use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::is_all_zero;
use crate::error::{Error, Result};
use crate::linalg::{check_positive, sym, sym_eig, thin_qr, SymEig};
use crate::manifold::Manifold;
use crate::random::{gaussian_matrix, uniform};

/// A symmetric positive definite matrix with its square root, inverse square
/// root and inverse cached from one eigendecomposition.
#[derive(Debug, Clone)]
pub struct SpdPoint {
    x: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    isqrt: DMatrix<f64>,
    inv: DMatrix<f64>,
    lambda_min: f64,
}

impl SpdPoint {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let eig = sym_eig(&x)?;
        check_positive(&eig)?;
        Ok(Self::from_eig(&eig))
    }

    fn from_eig(eig: &SymEig) -> Self {
        SpdPoint {
            x: eig.map(|l| l),
            sqrt: eig.map(f64::sqrt),
            isqrt: eig.map(|l| 1.0 / l.sqrt()),
            inv: eig.map(|l| 1.0 / l),
            lambda_min: eig.min(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    pub fn inv_sqrt(&self) -> &DMatrix<f64> {
        &self.isqrt
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    /// `X^{-1/2} Y X^{-1/2}`, symmetrized.
    fn whiten(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        sym(&(&self.isqrt * y * &self.isqrt))
    }
}

/// Positive definite cone with the affine-invariant metric `tr(X⁻¹ U X⁻¹ W)`.
/// The retraction is the exact exponential map and the transport is parallel
/// transport along geodesics.
#[derive(Debug, Clone)]
pub struct Spd {
    n: usize,
}

impl Spd {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("SPD manifold needs n >= 1".into()));
        }
        Ok(Spd { n })
    }

    /// Riemannian logarithm `Log_X(Y) = X^{1/2} log(X^{-1/2} Y X^{-1/2}) X^{1/2}`.
    pub fn log_at(&self, x: &SpdPoint, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let eig = sym_eig(&x.whiten(y))?;
        check_positive(&eig)?;
        let l = eig.map(f64::ln);
        Ok(sym(&(&x.sqrt * l * &x.sqrt)))
    }

    /// Squared distance from a cached point to a raw SPD matrix.
    pub fn dist_sq_to(&self, x: &SpdPoint, y: &DMatrix<f64>) -> Result<f64> {
        let eig = sym_eig(&x.whiten(y))?;
        check_positive(&eig)?;
        Ok(eig.values.iter().map(|l| l.ln().powi(2)).sum())
    }
}

impl Manifold for Spd {
    type Repr = SpdPoint;
    type Vector = DMatrix<f64>;
    type Ambient = DMatrix<f64>;

    fn name(&self) -> &'static str {
        "spd"
    }

    fn dims(&self) -> Vec<usize> {
        vec![self.n, self.n]
    }

    fn intrinsic_dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn validate(&self, x: &SpdPoint) -> Result<()> {
        if x.x.shape() != (self.n, self.n) {
            return Err(Error::DimensionMismatch(format!(
                "SPD point must be {0}x{0}, got {1}x{2}",
                self.n,
                x.x.nrows(),
                x.x.ncols()
            )));
        }
        let asym = (&x.x - x.x.transpose()).norm();
        if !(asym <= 1e-10 * x.x.norm()) {
            return Err(Error::Infeasible(format!("asymmetry {asym:e}")));
        }
        if !(x.lambda_min > 0.0) {
            return Err(Error::NotPositiveDefinite {
                lambda_min: x.lambda_min,
            });
        }
        Ok(())
    }

    fn inner_at(&self, x: &SpdPoint, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
        let a = &x.inv * u;
        let b = &x.inv * v;
        // tr(A B) without forming the product
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += a[(i, j)] * b[(j, i)];
            }
        }
        acc
    }

    fn proj_at(&self, _x: &SpdPoint, a: &DMatrix<f64>) -> DMatrix<f64> {
        sym(a)
    }

    fn retract_at(&self, x: &SpdPoint, v: &DMatrix<f64>) -> Result<SpdPoint> {
        if is_all_zero(v) {
            return Ok(x.clone());
        }
        self.exp_at(x, v)
    }

    fn transport_at(
        &self,
        x: &SpdPoint,
        y: &SpdPoint,
        u: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        self.parallel_transport_at(x, y, u)
    }

    fn egrad_to_rgrad_at(&self, x: &SpdPoint, g: &DMatrix<f64>) -> DMatrix<f64> {
        sym(&(&x.x * sym(g) * &x.x))
    }

    fn zero_at(&self, _x: &SpdPoint) -> DMatrix<f64> {
        DMatrix::zeros(self.n, self.n)
    }

    fn isometric_coords(&self, x: &SpdPoint, v: &DMatrix<f64>) -> DVector<f64> {
        let w = &x.isqrt * v * &x.isqrt;
        DVector::from_column_slice(w.as_slice())
    }

    fn embed_point(&self, x: &SpdPoint) -> DMatrix<f64> {
        x.x.clone()
    }

    fn embed_tangent(&self, _x: &SpdPoint, v: &DMatrix<f64>) -> DMatrix<f64> {
        v.clone()
    }

    fn ambient_from_dense(&self, a: DMatrix<f64>) -> DMatrix<f64> {
        a
    }

    fn random_repr(&self, rng: &mut dyn RngCore) -> SpdPoint {
        let (q, _) = thin_qr(&gaussian_matrix(self.n, self.n, rng)).expect("finite");
        let d = DVector::from_fn(self.n, |_, _| uniform(1.0, 10.0, rng));
        SpdPoint::new(&q * DMatrix::from_diagonal(&d) * q.transpose())
            .expect("eigenvalues in [1, 10]")
    }

    fn random_vector_at(&self, _x: &SpdPoint, rng: &mut dyn RngCore) -> DMatrix<f64> {
        sym(&gaussian_matrix(self.n, self.n, rng))
    }

    /// `E U Eᵀ` with `E = X^{1/2} (X^{-1/2} Y X^{-1/2})^{1/2} X^{-1/2}`.
    fn parallel_transport_at(
        &self,
        x: &SpdPoint,
        y: &SpdPoint,
        u: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let eig = sym_eig(&x.whiten(&y.x))?;
        check_positive(&eig)?;
        let mid = eig.map(f64::sqrt);
        let e = &x.sqrt * mid * &x.isqrt;
        Ok(sym(&(&e * u * e.transpose())))
    }

    fn dist_at(&self, x: &SpdPoint, y: &SpdPoint) -> Result<f64> {
        Ok(self.dist_sq_to(x, &y.x)?.sqrt())
    }

    fn exp_at(&self, x: &SpdPoint, v: &DMatrix<f64>) -> Result<SpdPoint> {
        let inner = x.whiten(v);
        let e = sym_eig(&inner)?;
        let ex = e.map(f64::exp);
        let y = sym(&(&x.sqrt * ex * &x.sqrt));
        SpdPoint::new(y)
    }
}
