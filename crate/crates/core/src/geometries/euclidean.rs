use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::frob_dot;
use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::random::gaussian_matrix;

/// Flat space `R^{rows × cols}`: retraction `x + v`, identity transport.
#[derive(Debug, Clone)]
pub struct Euclidean {
    rows: usize,
    cols: usize,
}

impl Euclidean {
    pub fn new(rows: usize, cols: usize) -> Self {
        Euclidean { rows, cols }
    }

    /// Column vectors in `R^dim`.
    pub fn vector(dim: usize) -> Self {
        Euclidean { rows: dim, cols: 1 }
    }
}

impl Manifold for Euclidean {
    type Repr = DMatrix<f64>;
    type Vector = DMatrix<f64>;
    type Ambient = DMatrix<f64>;

    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn dims(&self) -> Vec<usize> {
        vec![self.rows, self.cols]
    }

    fn intrinsic_dim(&self) -> usize {
        self.rows * self.cols
    }

    fn validate(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.shape() != (self.rows, self.cols) {
            return Err(Error::DimensionMismatch(format!(
                "expected {}x{}, got {}x{}",
                self.rows,
                self.cols,
                x.nrows(),
                x.ncols()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("euclidean point"));
        }
        Ok(())
    }

    fn inner_at(&self, _x: &DMatrix<f64>, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
        frob_dot(u, v)
    }

    fn proj_at(&self, _x: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
        a.clone()
    }

    fn retract_at(&self, x: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(x + v)
    }

    fn transport_at(
        &self,
        _x: &DMatrix<f64>,
        _y: &DMatrix<f64>,
        u: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        Ok(u.clone())
    }

    fn egrad_to_rgrad_at(&self, _x: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
        g.clone()
    }

    fn zero_at(&self, _x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.rows, self.cols)
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
        gaussian_matrix(self.rows, self.cols, rng)
    }

    fn random_vector_at(&self, _x: &DMatrix<f64>, rng: &mut dyn RngCore) -> DMatrix<f64> {
        gaussian_matrix(self.rows, self.cols, rng)
    }

    fn parallel_transport_at(
        &self,
        _x: &DMatrix<f64>,
        _y: &DMatrix<f64>,
        u: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        Ok(u.clone())
    }

    fn dist_at(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
        Ok((x - y).norm())
    }

    fn exp_at(&self, x: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(x + v)
    }
}
