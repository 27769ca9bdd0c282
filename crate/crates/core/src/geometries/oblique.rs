use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::{frob_dot, is_all_zero};
use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::random::gaussian_matrix;

/// Product of `n` unit spheres in `R^p`, stored as a `p × n` matrix with unit columns.
///
/// Metric is the column-wise Euclidean one, the retraction normalizes columns,
/// and vector transport projects onto the target tangent space.
#[derive(Debug, Clone)]
pub struct Oblique {
    n: usize,
    p: usize,
}

impl Oblique {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput(format!(
                "oblique manifold needs n, p >= 1 (got n={n}, p={p})"
            )));
        }
        Ok(Oblique { n, p })
    }

    /// The unit sphere in `R^dim` (a single column).
    pub fn sphere(dim: usize) -> Self {
        Oblique { n: 1, p: dim.max(1) }
    }

    pub fn columns(&self) -> usize {
        self.n
    }

    pub fn column_dim(&self) -> usize {
        self.p
    }
}

fn col_angle(x: &[f64], y: &[f64]) -> f64 {
    let c: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let s = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let d = b - c * a;
            d * d
        })
        .sum::<f64>()
        .sqrt();
    s.atan2(c)
}

impl Manifold for Oblique {
    type Repr = DMatrix<f64>;
    type Vector = DMatrix<f64>;
    type Ambient = DMatrix<f64>;

    fn name(&self) -> &'static str {
        if self.n == 1 {
            "sphere"
        } else {
            "oblique"
        }
    }

    fn dims(&self) -> Vec<usize> {
        vec![self.p, self.n]
    }

    fn intrinsic_dim(&self) -> usize {
        self.n * (self.p - 1)
    }

    fn validate(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.shape() != (self.p, self.n) {
            return Err(Error::DimensionMismatch(format!(
                "oblique point must be {}x{}, got {}x{}",
                self.p,
                self.n,
                x.nrows(),
                x.ncols()
            )));
        }
        for (j, c) in x.column_iter().enumerate() {
            let dev = (c.norm() - 1.0).abs();
            if !(dev <= 1e-10) {
                return Err(Error::Infeasible(format!(
                    "column {j} has norm deviating from 1 by {dev:e}"
                )));
            }
        }
        Ok(())
    }

    fn inner_at(&self, _x: &DMatrix<f64>, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
        frob_dot(u, v)
    }

    fn proj_at(&self, x: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = a.clone();
        for (mut oc, xc) in out.column_iter_mut().zip(x.column_iter()) {
            let c = xc.dot(&oc);
            oc.axpy(-c, &xc, 1.0);
        }
        out
    }

    fn retract_at(&self, x: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if is_all_zero(v) {
            return Ok(x.clone());
        }
        let mut y = x + v;
        for (j, mut c) in y.column_iter_mut().enumerate() {
            let nrm = c.norm();
            if !(nrm > 0.0) || !nrm.is_finite() {
                return Err(Error::Retraction(format!(
                    "column {j} of x + v has norm {nrm}"
                )));
            }
            c /= nrm;
        }
        Ok(y)
    }

    fn transport_at(
        &self,
        _x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        u: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        Ok(self.proj_at(y, u))
    }

    fn egrad_to_rgrad_at(&self, x: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
        self.proj_at(x, g)
    }

    fn zero_at(&self, _x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.p, self.n)
    }

    fn isometric_coords(&self, _x: &DMatrix<f64>, v: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_column_slice(v.as_slice())
    }

    fn embed_point(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x.clone()
    }

    fn embed_tangent(&self, _x: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        v.clone()
    }

    fn ambient_from_dense(&self, a: DMatrix<f64>) -> DMatrix<f64> {
        a
    }

    fn random_repr(&self, rng: &mut dyn RngCore) -> DMatrix<f64> {
        let mut g = gaussian_matrix(self.p, self.n, rng);
        for mut c in g.column_iter_mut() {
            let nrm = c.norm();
            c /= nrm;
        }
        g
    }

    fn random_vector_at(&self, x: &DMatrix<f64>, rng: &mut dyn RngCore) -> DMatrix<f64> {
        self.proj_at(x, &gaussian_matrix(self.p, self.n, rng))
    }

    /// Column-wise transport along the great circle joining `x_i` and `y_i`.
    fn parallel_transport_at(
        &self,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        u: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let mut out = u.clone();
        for j in 0..self.n {
            let (xc, yc) = (x.column(j), y.column(j));
            let denom = 1.0 + xc.dot(&yc);
            if denom < 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "column {j}: antipodal points have no unique geodesic"
                )));
            }
            let c = yc.dot(&u.column(j)) / denom;
            let shift = (xc + yc) * c;
            out.column_mut(j).axpy(-1.0, &shift, 1.0);
        }
        Ok(out)
    }

    fn dist_at(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
        let total: f64 = x
            .column_iter()
            .zip(y.column_iter())
            .map(|(a, b)| col_angle(a.as_slice(), b.as_slice()).powi(2))
            .sum();
        Ok(total.sqrt())
    }

    fn exp_at(&self, x: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut y = x.clone();
        for j in 0..self.n {
            let t = v.column(j).norm();
            if t == 0.0 {
                continue;
            }
            let dir = v.column(j) / t;
            let col = x.column(j) * t.cos() + dir * t.sin();
            y.set_column(j, &col);
        }
        Ok(y)
    }
}
