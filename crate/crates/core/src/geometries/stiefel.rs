use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::{frob_dot, is_all_zero};
use crate::error::{Error, Result};
use crate::linalg::{sym, thin_qr};
use crate::manifold::Manifold;
use crate::random::gaussian_matrix;

/// Stiefel manifold `St(n, p)` of `n × p` matrices with orthonormal columns,
/// embedded metric, qf retraction and projection transport.
#[derive(Debug, Clone)]
pub struct Stiefel {
    n: usize,
    p: usize,
}

impl Stiefel {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if p == 0 || n < p {
            return Err(Error::InvalidInput(format!(
                "Stiefel manifold needs n >= p >= 1 (got n={n}, p={p})"
            )));
        }
        Ok(Stiefel { n, p })
    }
}

impl Manifold for Stiefel {
    type Repr = DMatrix<f64>;
    type Vector = DMatrix<f64>;
    type Ambient = DMatrix<f64>;

    fn name(&self) -> &'static str {
        "stiefel"
    }

    fn dims(&self) -> Vec<usize> {
        vec![self.n, self.p]
    }

    fn intrinsic_dim(&self) -> usize {
        self.n * self.p - self.p * (self.p + 1) / 2
    }

    fn validate(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.shape() != (self.n, self.p) {
            return Err(Error::DimensionMismatch(format!(
                "Stiefel point must be {}x{}, got {}x{}",
                self.n,
                self.p,
                x.nrows(),
                x.ncols()
            )));
        }
        let dev = (x.transpose() * x - DMatrix::identity(self.p, self.p)).norm();
        if !(dev <= 1e-10) {
            return Err(Error::Infeasible(format!("||X^T X - I||_F = {dev:e}")));
        }
        Ok(())
    }

    fn inner_at(&self, _x: &DMatrix<f64>, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
        frob_dot(u, v)
    }

    fn proj_at(&self, x: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
        a - x * sym(&(x.transpose() * a))
    }

    fn retract_at(&self, x: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if is_all_zero(v) {
            return Ok(x.clone());
        }
        let y = x + v;
        let (q, r) = thin_qr(&y)?;
        let scale = y.norm();
        for i in 0..self.p {
            if !(r[(i, i)] > 1e-13 * scale) {
                return Err(Error::Retraction(format!(
                    "X + V is rank deficient (R[{i},{i}] = {:e})",
                    r[(i, i)]
                )));
            }
        }
        Ok(q)
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
        DMatrix::zeros(self.n, self.p)
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
        let g = gaussian_matrix(self.n, self.p, rng);
        thin_qr(&g).expect("gaussian matrix is finite").0
    }

    fn random_vector_at(&self, x: &DMatrix<f64>, rng: &mut dyn RngCore) -> DMatrix<f64> {
        self.proj_at(x, &gaussian_matrix(self.n, self.p, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn circle_case() {
        let st = Stiefel::new(2, 1).unwrap();
        let x = st.point(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let v = st.tangent(&x, DMatrix::from_column_slice(2, 1, &[0.0, 1.0]));
        let y = st.retract(&x, &v).unwrap();
        assert_abs_diff_eq!(
            y.repr(),
            &DMatrix::from_column_slice(2, 1, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2]),
            epsilon = 1e-15
        );
        let p = st.proj(&x, &DMatrix::from_column_slice(2, 1, &[3.0, 4.0]));
        assert_abs_diff_eq!(p.coords()[(0, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.coords()[(1, 0)], 4.0, epsilon = 1e-15);
        let g = st.egrad2rgrad(&x, &DMatrix::from_column_slice(2, 1, &[0.0, 1.0]));
        assert_eq!(g.coords()[(1, 0)], 1.0);
        assert_eq!(g.coords()[(0, 0)], 0.0);
    }

    #[test]
    fn zero_step_is_identity() {
        let st = Stiefel::new(4, 2).unwrap();
        let mut rng = crate::random::seeded_rng(1);
        let x = st.random_point(&mut rng);
        let y = st.retract(&x, &st.zero_tangent(&x)).unwrap();
        assert_eq!(y.repr(), x.repr());
    }

    #[test]
    fn feasibility_drift_for_long_steps() {
        let st = Stiefel::new(12, 4).unwrap();
        let mut rng = crate::random::seeded_rng(2);
        for _ in 0..50 {
            let x = st.random_point(&mut rng);
            let v = st.random_tangent(&x, &mut rng);
            for &t in &[1e-3, 0.1, 1.0, 3.0, 10.0] {
                let y = st.retract(&x, &v.scaled(t)).unwrap();
                let drift = (y.repr().transpose() * y.repr() - DMatrix::identity(4, 4)).norm();
                assert!(drift <= 1e-12, "drift {drift:e} at t={t}");
            }
        }
    }

    #[test]
    fn rank_deficient_retraction_errors() {
        let st = Stiefel::new(2, 1).unwrap();
        let x = st.point(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        // not tangent, but exercises the rank check
        let v = st.tangent(&x, DMatrix::from_column_slice(2, 1, &[-1.0, 0.0]));
        assert!(matches!(st.retract(&x, &v), Err(Error::Retraction(_))));
    }
}
