use nalgebra::{DMatrix, DVector};

use super::{check_symmetric, Objective, ProblemInstance, ProblemMeta};
use crate::error::Result;
use crate::geometries::Stiefel;
use crate::linalg::sym;
use crate::random::{gaussian_matrix, seeded_rng};

/// Brockett cost `tr(XᵀAXN)` on the Stiefel manifold.
#[derive(Debug, Clone)]
pub struct Brockett {
    a: DMatrix<f64>,
    weights: DVector<f64>,
}

/// `N = diag(p, p−1, …, 1)`.
pub fn brockett_weights(p: usize) -> DVector<f64> {
    DVector::from_fn(p, |i, _| (p - i) as f64)
}

impl Brockett {
    pub fn new(a: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        check_symmetric(&a, "Brockett matrix")?;
        Ok(Brockett { a, weights })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    fn scale_columns(&self, mut m: DMatrix<f64>) -> DMatrix<f64> {
        for (j, mut c) in m.column_iter_mut().enumerate() {
            c *= self.weights[j];
        }
        m
    }
}

impl Objective<Stiefel> for Brockett {
    fn cost(&self, x: &DMatrix<f64>) -> Result<f64> {
        let ax = &self.a * x;
        Ok(x
            .column_iter()
            .zip(ax.column_iter())
            .zip(self.weights.iter())
            .map(|((xc, ac), w)| w * xc.dot(&ac))
            .sum())
    }

    fn egrad(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.scale_columns(&self.a * x) * 2.0)
    }
}

pub fn brockett_problem(a: DMatrix<f64>, p: usize) -> Result<ProblemInstance<Stiefel>> {
    let n = a.nrows();
    let manifold = Stiefel::new(n, p)?;
    let obj = Brockett::new(a, brockett_weights(p))?;
    Ok(ProblemInstance::new(
        manifold,
        obj,
        ProblemMeta {
            name: "brockett".into(),
            dims: vec![n, p],
            seed: None,
        },
    ))
}

/// `A = ½(C + Cᵀ)` with standard normal `C`.
pub fn gen_brockett(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded_rng(seed);
    let c = gaussian_matrix(n, n, &mut rng);
    sym(&c)
}
