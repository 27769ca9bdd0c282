use nalgebra::{DMatrix, DVector};

use super::{Objective, ProblemInstance, ProblemMeta};
use crate::error::{Error, Result};
use crate::geometries::{Spd, SpdPoint};
use crate::linalg::{sym, thin_qr};
use crate::random::{gaussian_matrix, seeded_rng, uniform};

/// Karcher mean objective `Σ_k dist(X, A_k)²` under the affine-invariant metric.
#[derive(Debug, Clone)]
pub struct Karcher {
    spd: Spd,
    members: Vec<DMatrix<f64>>,
}

impl Karcher {
    pub fn new(members: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = members
            .first()
            .ok_or_else(|| Error::InvalidInput("Karcher mean needs at least one matrix".into()))?
            .nrows();
        for (i, a) in members.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(Error::DimensionMismatch(format!("member {i} is not {n}x{n}")));
            }
            SpdPoint::new(a.clone()).map_err(|e| {
                Error::InvalidInput(format!("member {i} is not positive definite: {e}"))
            })?;
        }
        Ok(Karcher {
            spd: Spd::new(n)?,
            members,
        })
    }

    pub fn members(&self) -> &[DMatrix<f64>] {
        &self.members
    }
}

impl Objective<Spd> for Karcher {
    fn cost(&self, x: &SpdPoint) -> Result<f64> {
        self.members.iter().map(|a| self.spd.dist_sq_to(x, a)).sum()
    }

    /// `X⁻¹ (grad f) X⁻¹`, consistent with the affine-invariant metric.
    fn egrad(&self, x: &SpdPoint) -> Result<DMatrix<f64>> {
        let rg = self.rgrad(&self.spd, x)?;
        Ok(sym(&(x.inverse() * rg * x.inverse())))
    }

    /// `grad f(X) = −2 Σ_k Log_X(A_k)`.
    fn rgrad(&self, spd: &Spd, x: &SpdPoint) -> Result<DMatrix<f64>> {
        let n = x.matrix().nrows();
        let mut g = DMatrix::zeros(n, n);
        for a in &self.members {
            g -= spd.log_at(x, a)? * 2.0;
        }
        Ok(g)
    }
}

pub fn karcher_problem(members: Vec<DMatrix<f64>>) -> Result<ProblemInstance<Spd>> {
    let obj = Karcher::new(members)?;
    let n = obj.members[0].nrows();
    let count = obj.members.len();
    Ok(ProblemInstance::new(
        obj.spd.clone(),
        obj,
        ProblemMeta {
            name: "karcher".into(),
            dims: vec![n, count],
            seed: None,
        },
    ))
}

/// `count` random SPD matrices `Q diag(u) Qᵀ` with `u ~ U[1, 10]`.
pub fn gen_spd_set(n: usize, count: usize, seed: u64) -> Result<Vec<DMatrix<f64>>> {
    if n == 0 || count == 0 {
        return Err(Error::InvalidInput("gen_spd_set needs n, m >= 1".into()));
    }
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| {
            let (q, _) = thin_qr(&gaussian_matrix(n, n, &mut rng))?;
            let d = DVector::from_fn(n, |_, _| uniform(1.0, 10.0, &mut rng));
            Ok(sym(&(&q * DMatrix::from_diagonal(&d) * q.transpose())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;
    use crate::manifold::Manifold;
    use approx::assert_abs_diff_eq;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn single_member_is_its_own_mean() {
        let set = gen_spd_set(4, 1, 3).unwrap();
        let prob = karcher_problem(set.clone()).unwrap();
        let x = prob.manifold.point(SpdPoint::new(set[0].clone()).unwrap()).unwrap();
        assert!(prob.gradient(&x).unwrap().coords().norm() < 1e-12);
        assert!(prob.cost(&x).unwrap() < 1e-24);
    }

    #[test]
    fn scalar_geometric_mean() {
        // f(x) = ln²x + ln²(x/4) is minimized at x = 2 with f* = 2 ln²2
        let prob = karcher_problem(vec![scalar(1.0), scalar(4.0)]).unwrap();
        let x = prob.manifold.point(SpdPoint::new(scalar(2.0)).unwrap()).unwrap();
        let ln2 = 2f64.ln();
        assert_abs_diff_eq!(prob.cost(&x).unwrap(), 2.0 * ln2 * ln2, epsilon = 1e-15);
        assert!(prob.gradient(&x).unwrap().coords().norm() <= 1e-10);
    }

    #[test]
    fn commuting_members_have_elementwise_geometric_mean() {
        let d = |a: f64, b: f64| DMatrix::from_diagonal(&DVector::from_vec(vec![a, b]));
        let prob = karcher_problem(vec![d(1.0, 2.0), d(4.0, 8.0), d(2.0, 0.5)]).unwrap();
        let gm = |v: [f64; 3]| (v[0] * v[1] * v[2]).cbrt();
        let x = d(gm([1.0, 4.0, 2.0]), gm([2.0, 8.0, 0.5]));
        let x = prob.manifold.point(SpdPoint::new(x).unwrap()).unwrap();
        assert!(prob.gradient(&x).unwrap().coords().norm() <= 1e-12);
    }

    #[test]
    fn generated_set_contract() {
        let set = gen_spd_set(5, 4, 11).unwrap();
        assert_eq!(set.len(), 4);
        for a in &set {
            let e = sym_eig(a).unwrap();
            assert!(e.min() >= 1.0 - 1e-12 && e.max() <= 10.0 + 1e-12);
        }
        let again = gen_spd_set(5, 4, 11).unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn non_spd_member_rejected() {
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(karcher_problem(vec![bad]).is_err());
    }
}
