use nalgebra::DMatrix;

use super::{check_symmetric, Objective, ProblemInstance, ProblemMeta};
use crate::error::Result;
use crate::geometries::Oblique;

/// Rayleigh quotient `xᵀAx` on the unit sphere; its minimizers are the
/// eigenvectors of the smallest eigenvalue of `A`.
#[derive(Debug, Clone)]
pub struct Rayleigh {
    a: DMatrix<f64>,
}

impl Objective<Oblique> for Rayleigh {
    fn cost(&self, x: &DMatrix<f64>) -> Result<f64> {
        Ok((&self.a * x).dot(x))
    }

    fn egrad(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(&self.a * x * 2.0)
    }
}

pub fn rayleigh_problem(a: DMatrix<f64>) -> Result<ProblemInstance<Oblique>> {
    check_symmetric(&a, "Rayleigh matrix")?;
    let n = a.nrows();
    Ok(ProblemInstance::new(
        Oblique::sphere(n),
        Rayleigh { a },
        ProblemMeta {
            name: "rayleigh".into(),
            dims: vec![n],
            seed: None,
        },
    ))
}
