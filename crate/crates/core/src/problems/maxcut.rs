use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{check_symmetric, Objective, ProblemInstance, ProblemMeta};
use crate::error::{Error, Result};
use crate::geometries::Oblique;
use crate::random::seeded_rng;

/// Burer–Monteiro max-cut relaxation `min -tr(C VᵀV)` over unit columns,
/// with `C = ¼(diag(W1) − W)`.
#[derive(Debug, Clone)]
pub struct MaxCut {
    c: DMatrix<f64>,
}

impl MaxCut {
    pub fn new(w: &DMatrix<f64>) -> Result<Self> {
        check_symmetric(w, "weight matrix")?;
        if w.diagonal().iter().any(|&d| d != 0.0) {
            return Err(Error::InvalidInput("weight matrix must have zero diagonal".into()));
        }
        let degree: DVector<f64> = w.column_sum();
        let c = (DMatrix::from_diagonal(&degree) - w) * 0.25;
        Ok(MaxCut { c })
    }

    /// `C = ¼(diag(W1) − W)`.
    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.c
    }
}

impl Objective<Oblique> for MaxCut {
    fn cost(&self, v: &DMatrix<f64>) -> Result<f64> {
        let vc = v * &self.c;
        Ok(-vc.dot(v))
    }

    fn egrad(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(v * &self.c * -2.0)
    }
}

pub fn maxcut_problem(w: &DMatrix<f64>, p: usize) -> Result<ProblemInstance<Oblique>> {
    let n = w.nrows();
    let obj = MaxCut::new(w)?;
    Ok(ProblemInstance::new(
        Oblique::new(n, p)?,
        obj,
        ProblemMeta {
            name: "maxcut".into(),
            dims: vec![n, p],
            seed: None,
        },
    ))
}

/// Random symmetric weights: each upper-triangle edge kept with probability
/// `1 − tau`, weight uniform on `(0, 1)`.
pub fn gen_maxcut(n: usize, tau: f64, seed: u64) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput("max-cut graph needs n >= 2".into()));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidInput(format!("tau must lie in [0, 1], got {tau}")));
    }
    let mut rng = seeded_rng(seed);
    let mut w = DMatrix::zeros(n, n);
    for j in 1..n {
        for i in 0..j {
            let keep: f64 = rng.random();
            let weight: f64 = rng.random();
            if keep >= tau {
                w[(i, j)] = weight;
                w[(j, i)] = weight;
            }
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Manifold;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_node_cut() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let c = MaxCut::new(&w).unwrap();
        assert_eq!(
            c.laplacian(),
            &(DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]) * 0.25)
        );
        let prob = maxcut_problem(&w, 1).unwrap();
        let x = prob.manifold.point(DMatrix::from_row_slice(1, 2, &[1.0, -1.0])).unwrap();
        assert_abs_diff_eq!(prob.cost(&x).unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_graph_is_flat() {
        let w = DMatrix::zeros(4, 4);
        let prob = maxcut_problem(&w, 3).unwrap();
        let col = [0.0, 0.6, 0.8];
        let v = DMatrix::from_fn(3, 4, |i, _| col[i]);
        let x = prob.manifold.point(v).unwrap();
        assert_eq!(prob.cost(&x).unwrap(), 0.0);
        assert!(prob.egrad(&x).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn sign_flip_invariance_p1() {
        let w = gen_maxcut(12, 0.4, 3).unwrap();
        let prob = maxcut_problem(&w, 1).unwrap();
        let mut rng = seeded_rng(1);
        for _ in 0..10 {
            let x = prob.manifold.random_point(&mut rng);
            let neg = prob.manifold.point(-x.repr()).unwrap();
            assert_abs_diff_eq!(
                prob.cost(&x).unwrap(),
                prob.cost(&neg).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn generator_contract() {
        let a = gen_maxcut(30, 0.3, 9).unwrap();
        let b = gen_maxcut(30, 0.3, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, a.transpose());
        assert!(a.diagonal().iter().all(|&d| d == 0.0));
        assert!(a.iter().all(|&x| (0.0..1.0).contains(&x)));
        let empty = gen_maxcut(50, 1.0, 1).unwrap();
        assert!(empty.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn edge_density_concentrates() {
        // n = 1000 has 499500 candidate edges, std of density ~ 6.5e-4
        for seed in 0..3 {
            let w = gen_maxcut(1000, 0.3, seed).unwrap();
            let edges = w.iter().filter(|&&x| x > 0.0).count() / 2;
            let density = edges as f64 / (1000.0 * 999.0 / 2.0);
            assert!((density - 0.7).abs() <= 0.02, "density {density}");
        }
    }

    #[test]
    fn asymmetric_rejected() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(maxcut_problem(&w, 1).is_err());
    }
}
