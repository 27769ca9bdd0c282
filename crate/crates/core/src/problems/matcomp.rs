use nalgebra::DMatrix;
use rand::Rng;

use super::{Objective, ProblemInstance, ProblemMeta};
use crate::error::{Error, Result};
use crate::geometries::{FixedRank, FixedRankAmbient, FixedRankPoint, SparseMatrix};
use crate::random::{gaussian_matrix, seeded_rng};

/// Observed entries of a matrix, sorted by `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatCompData {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl MatCompData {
    pub fn from_dense(a: &DMatrix<f64>, omega: &[(usize, usize)]) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::InvalidInput("observation set is empty".into()));
        }
        let mut idx = omega.to_vec();
        idx.sort_unstable();
        idx.dedup();
        let (n, m) = a.shape();
        if let Some(&(i, j)) = idx.iter().find(|&&(i, j)| i >= n || j >= m) {
            return Err(Error::InvalidInput(format!(
                "observed index ({i}, {j}) outside {n}x{m}"
            )));
        }
        Ok(MatCompData {
            nrows: n,
            ncols: m,
            rows: idx.iter().map(|p| p.0).collect(),
            cols: idx.iter().map(|p| p.1).collect(),
            values: idx.iter().map(|&(i, j)| a[(i, j)]).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `‖P_Ω(A)‖_F`.
    pub fn observed_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `½‖P_Ω(X − A)‖²_F` over rank-`k` matrices.
#[derive(Debug, Clone)]
pub struct MatComp {
    data: MatCompData,
}

impl MatComp {
    pub fn new(data: MatCompData) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidInput("observation set is empty".into()));
        }
        Ok(MatComp { data })
    }

    pub fn data(&self) -> &MatCompData {
        &self.data
    }

    /// `P_Ω(X − A)` as a list aligned with the observed entries.
    pub fn residuals(&self, x: &FixedRankPoint) -> Vec<f64> {
        let ust = x.us().transpose();
        let vt = x.v.transpose();
        self.data
            .rows
            .iter()
            .zip(&self.data.cols)
            .zip(&self.data.values)
            .map(|((&i, &j), &a)| ust.column(i).dot(&vt.column(j)) - a)
            .collect()
    }
}

impl Objective<FixedRank> for MatComp {
    fn cost(&self, x: &FixedRankPoint) -> Result<f64> {
        Ok(0.5 * self.residuals(x).iter().map(|r| r * r).sum::<f64>())
    }

    fn egrad(&self, x: &FixedRankPoint) -> Result<FixedRankAmbient> {
        Ok(FixedRankAmbient::Sparse(SparseMatrix {
            nrows: self.data.nrows,
            ncols: self.data.ncols,
            rows: self.data.rows.clone(),
            cols: self.data.cols.clone(),
            vals: self.residuals(x),
        }))
    }
}

pub fn matcomp_problem(data: MatCompData, k: usize) -> Result<ProblemInstance<FixedRank>> {
    let (n, m) = (data.nrows, data.ncols);
    let manifold = FixedRank::new(n, m, k)?;
    let obj = MatComp::new(data)?;
    Ok(ProblemInstance::new(
        manifold,
        obj,
        ProblemMeta {
            name: "matcomp".into(),
            dims: vec![n, m, k],
            seed: None,
        },
    ))
}

/// Oversampling ratio `3k(n + m − k)/(nm)`.
pub fn sampling_ratio(n: usize, m: usize, k: usize) -> f64 {
    3.0 * (k * (n + m - k)) as f64 / (n * m) as f64
}

/// Rank-`k` matrix `A = LR` (standard normal factors) and an observation set
/// where each entry is kept independently with probability `min(1, τ)`.
pub fn gen_matcomp(n: usize, m: usize, k: usize, seed: u64) -> Result<(DMatrix<f64>, Vec<(usize, usize)>)> {
    if k == 0 || k > n.min(m) {
        return Err(Error::InvalidInput(format!(
            "rank {k} must lie in 1..=min({n}, {m})"
        )));
    }
    let mut rng = seeded_rng(seed);
    let l = gaussian_matrix(n, k, &mut rng);
    let r = gaussian_matrix(k, m, &mut rng);
    let a = l * r;
    let tau = sampling_ratio(n, m, k).min(1.0);
    let needed = k * (n + m - k);
    for _ in 0..10 {
        let mut omega = Vec::with_capacity((tau * (n * m) as f64) as usize + 16);
        for i in 0..n {
            for j in 0..m {
                let c: f64 = rng.random();
                if c < tau {
                    omega.push((i, j));
                }
            }
        }
        if omega.len() >= needed {
            return Ok((a, omega));
        }
    }
    Err(Error::InvalidInput(format!(
        "could not draw {needed} observations after 10 attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Manifold;
    use nalgebra::DVector;

    #[test]
    fn exact_fit_has_zero_cost() {
        let a = DMatrix::from_element(2, 2, 1.0);
        let omega = vec![(0, 0), (0, 1), (1, 0), (1, 1)];
        let prob = matcomp_problem(MatCompData::from_dense(&a, &omega).unwrap(), 1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let x = FixedRankPoint {
            u: DMatrix::from_column_slice(2, 1, &[h, h]),
            s: DVector::from_vec(vec![2.0]),
            v: DMatrix::from_column_slice(2, 1, &[h, h]),
        };
        let x = prob.manifold.point(x).unwrap();
        assert!(prob.cost(&x).unwrap() < 1e-30);
        assert!(prob.gradient(&x).unwrap().coords().m.norm() < 1e-15);
    }

    #[test]
    fn cost_matches_dense_evaluation() {
        let (a, omega) = gen_matcomp(12, 9, 2, 4).unwrap();
        let data = MatCompData::from_dense(&a, &omega).unwrap();
        let prob = matcomp_problem(data.clone(), 2).unwrap();
        let mut rng = seeded_rng(1);
        let x = prob.manifold.random_point(&mut rng);
        let dense = x.repr().to_dense();
        let want: f64 = 0.5
            * data
                .rows
                .iter()
                .zip(&data.cols)
                .map(|(&i, &j)| (dense[(i, j)] - a[(i, j)]).powi(2))
                .sum::<f64>();
        assert!((prob.cost(&x).unwrap() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn sampling_ratio_example() {
        assert!((sampling_ratio(100, 100, 5) - 0.2925).abs() < 1e-15);
    }

    #[test]
    fn observed_fraction_concentrates() {
        let tau = sampling_ratio(100, 100, 5);
        let sigma = (tau * (1.0 - tau) / 10_000.0).sqrt();
        for seed in 0..20 {
            let (_, omega) = gen_matcomp(100, 100, 5, seed).unwrap();
            let frac = omega.len() as f64 / 10_000.0;
            assert!((frac - tau).abs() <= 3.0 * sigma, "seed {seed}: {frac}");
        }
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(gen_matcomp(20, 15, 3, 7).unwrap(), gen_matcomp(20, 15, 3, 7).unwrap());
    }

    #[test]
    fn empty_observations_rejected() {
        let a = DMatrix::zeros(3, 3);
        assert!(MatCompData::from_dense(&a, &[]).is_err());
    }
}
