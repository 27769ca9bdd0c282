//! Dense linear-algebra kernels.
//!
//! Every matrix-valued computation in the crate goes through the four entry
//! points here (`thin_qr`, `sym_eig`, `spd_fn`, `thin_svd`). The numeric
//! backend is nalgebra, except for the SVD, which runs in faer; swapping
//! either only touches this file.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Column-major dense matrix of `f64`.
pub type DenseMatrix = DMatrix<f64>;

/// Scalar functions that can be lifted to symmetric positive definite matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpdFn {
    Log,
    Exp,
    Sqrt,
    InvSqrt,
}

impl SpdFn {
    fn apply(self, x: f64) -> f64 {
        match self {
            SpdFn::Log => x.ln(),
            SpdFn::Exp => x.exp(),
            SpdFn::Sqrt => x.sqrt(),
            SpdFn::InvSqrt => 1.0 / x.sqrt(),
        }
    }

    fn needs_positive(self) -> bool {
        !matches!(self, SpdFn::Exp)
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    pub vectors: DenseMatrix,
}

impl SymEig {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let fl = f(lam);
            scaled.column_mut(j).scale_mut(fl);
        }
        let mut out = &scaled * self.vectors.transpose();
        symmetrize_mut(&mut out);
        out
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Thin singular value decomposition, singular values descending.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DenseMatrix,
    pub s: DVector<f64>,
    pub v: DenseMatrix,
}

fn ensure_finite(a: &DenseMatrix, what: &'static str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn symmetrize_mut(a: &mut DenseMatrix) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// `½(A + Aᵀ)`.
pub fn sym(a: &DenseMatrix) -> DenseMatrix {
    let mut out = a.clone();
    symmetrize_mut(&mut out);
    out
}

/// Householder QR of a tall matrix with the sign convention `diag(R) ≥ 0`.
///
/// Rank deficiency is not an error: the corresponding diagonal entries of `R`
/// come out as (numerically) zero.
pub fn thin_qr(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::DimensionMismatch(format!(
            "thin_qr needs rows >= cols, got {m}x{n}"
        )));
    }
    ensure_finite(a, "thin_qr input")?;
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    Ok((q, r))
}

/// Symmetric eigendecomposition (input symmetrized), eigenvalues ascending.
pub fn sym_eig(s: &DenseMatrix) -> Result<SymEig> {
    let (n, m) = s.shape();
    if n != m {
        return Err(Error::DimensionMismatch(format!(
            "sym_eig needs a square matrix, got {n}x{m}"
        )));
    }
    ensure_finite(s, "sym_eig input")?;
    if n == 0 {
        return Ok(SymEig {
            values: DVector::zeros(0),
            vectors: DenseMatrix::zeros(0, 0),
        });
    }
    let eig = sym(s).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("sym_eig eigenvalues"));
    }
    Ok(SymEig { values, vectors })
}

/// Lift `f` to a symmetric (positive definite, for log/sqrt/inv_sqrt) matrix.
pub fn spd_fn(s: &DenseMatrix, f: SpdFn) -> Result<DenseMatrix> {
    let eig = sym_eig(s)?;
    if f.needs_positive() {
        check_positive(&eig)?;
    }
    Ok(eig.map(|x| f.apply(x)))
}

pub(crate) fn check_positive(eig: &SymEig) -> Result<()> {
    if eig.values.is_empty() {
        return Ok(());
    }
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 1e-14 * hi.abs()) || lo <= 0.0 {
        return Err(Error::NotPositiveDefinite { lambda_min: lo });
    }
    Ok(())
}

/// Thin SVD `A = U diag(s) Vᵀ` with `r = min(m, n)` and `s` descending.
pub fn thin_svd(a: &DenseMatrix) -> Result<ThinSvd> {
    ensure_finite(a, "thin_svd input")?;
    let (m, n) = a.shape();
    let r = m.min(n);
    if r == 0 {
        return Ok(ThinSvd {
            u: DenseMatrix::zeros(m, 0),
            s: DVector::zeros(0),
            v: DenseMatrix::zeros(n, 0),
        });
    }
    let fa = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = fa
        .thin_svd()
        .map_err(|e| Error::Singular(format!("SVD did not converge: {e:?}")))?;
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| fs[j].total_cmp(&fs[i]));
    let s = DVector::from_iterator(r, order.iter().map(|&i| fs[i]));
    let u = DenseMatrix::from_fn(m, r, |i, j| fu[(i, order[j])]);
    let v = DenseMatrix::from_fn(n, r, |i, j| fv[(i, order[j])]);
    ensure_finite(&u, "thin_svd factors")?;
    ensure_finite(&v, "thin_svd factors")?;
    Ok(ThinSvd { u, s, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> DenseMatrix {
        DenseMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn qr_identity() {
        let (q, r) = thin_qr(&DenseMatrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(q, DenseMatrix::identity(2, 2), epsilon = 1e-15);
        assert_abs_diff_eq!(r, DenseMatrix::identity(2, 2), epsilon = 1e-15);
    }

    #[test]
    fn qr_permutation_sign_convention() {
        let a = mat(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (q, r) = thin_qr(&a).unwrap();
        assert_abs_diff_eq!(q, a, epsilon = 1e-15);
        assert_abs_diff_eq!(r, DenseMatrix::identity(2, 2), epsilon = 1e-15);
    }

    #[test]
    fn qr_single_column() {
        let (q, r) = thin_qr(&mat(2, 1, &[3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(q, mat(2, 1, &[0.6, 0.8]), epsilon = 1e-15);
        assert_abs_diff_eq!(r[(0, 0)], 5.0, epsilon = 1e-14);
    }

    #[test]
    fn qr_wide_is_error() {
        assert!(matches!(
            thin_qr(&DenseMatrix::zeros(2, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn qr_rank_deficient_is_not_error() {
        let a = mat(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let (q, r) = thin_qr(&a).unwrap();
        assert!(r[(1, 1)].abs() < 1e-14);
        assert_abs_diff_eq!(&q * &r, a, epsilon = 1e-14);
    }

    #[test]
    fn eig_examples() {
        let e = sym_eig(&DenseMatrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(e.values.as_slice(), &[1.0, 1.0][..], epsilon = 1e-15);

        let e = sym_eig(&mat(2, 2, &[2.0, 0.0, 0.0, -1.0])).unwrap();
        assert_abs_diff_eq!(e.values.as_slice(), &[-1.0, 2.0][..], epsilon = 1e-15);
        assert_abs_diff_eq!(e.vectors[(1, 0)].abs(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.vectors[(0, 1)].abs(), 1.0, epsilon = 1e-15);

        let e = sym_eig(&mat(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(e.values.as_slice(), &[-1.0, 1.0][..], epsilon = 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // eigenvectors are defined up to sign
        let v0 = e.vectors.column(0) * e.vectors[(0, 0)].signum();
        let v1 = e.vectors.column(1) * e.vectors[(0, 1)].signum();
        assert_abs_diff_eq!(v0.as_slice(), &[h, -h][..], epsilon = 1e-15);
        assert_abs_diff_eq!(v1.as_slice(), &[h, h][..], epsilon = 1e-15);
    }

    #[test]
    fn eig_rejects_nan() {
        let a = mat(2, 2, &[f64::NAN, 0.0, 0.0, 1.0]);
        assert!(matches!(sym_eig(&a), Err(Error::NonFinite(_))));
    }

    #[test]
    fn spd_fn_examples() {
        let z = spd_fn(&DenseMatrix::identity(3, 3), SpdFn::Log).unwrap();
        assert_abs_diff_eq!(z, DenseMatrix::zeros(3, 3), epsilon = 1e-15);

        let d = DenseMatrix::from_diagonal(&DVector::from_vec(vec![1.0, std::f64::consts::E]));
        let l = spd_fn(&d, SpdFn::Log).unwrap();
        assert_abs_diff_eq!(l, mat(2, 2, &[0.0, 0.0, 0.0, 1.0]), epsilon = 1e-15);

        let d = DenseMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let is = spd_fn(&d, SpdFn::InvSqrt).unwrap();
        assert_abs_diff_eq!(is, mat(2, 2, &[0.5, 0.0, 0.0, 1.0 / 3.0]), epsilon = 1e-15);
    }

    #[test]
    fn spd_fn_domain_error_carries_lambda_min() {
        let d = DenseMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 1.0]));
        match spd_fn(&d, SpdFn::Log) {
            Err(Error::NotPositiveDefinite { lambda_min }) => assert_eq!(lambda_min, -2.0),
            other => panic!("expected domain error, got {other:?}"),
        }
        // exp is defined everywhere
        assert!(spd_fn(&d, SpdFn::Exp).is_ok());
    }

    #[test]
    fn svd_examples() {
        let s = thin_svd(&mat(2, 2, &[3.0, 0.0, 0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(s.s.as_slice(), &[3.0, 1.0][..], epsilon = 1e-14);

        let s = thin_svd(&mat(2, 2, &[1.0, 0.0, 1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(s.s.as_slice(), &[2f64.sqrt(), 0.0][..], epsilon = 1e-14);

        let s = thin_svd(&DenseMatrix::zeros(3, 2)).unwrap();
        assert_abs_diff_eq!(s.s.as_slice(), &[0.0, 0.0][..], epsilon = 0.0);
    }

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    /// `diag(s, 0) + 1e-5·noise` outside the trailing zero block: the shape
    /// of a fixed-rank retraction core after a small step.
    fn retraction_core(k: usize, seed: u64) -> DenseMatrix {
        let g = gaussian(2 * k, 2 * k, seed);
        DenseMatrix::from_fn(2 * k, 2 * k, |i, j| {
            let d = if i == j && i < k { 500.0 - 10.0 * i as f64 } else { 0.0 };
            if i < k || j < k {
                d + 1e-5 * g[(i, j)]
            } else {
                d
            }
        })
    }

    #[test]
    fn svd_reproduces_nearly_diagonal_cores() {
        for seed in 0..300u64 {
            let c = retraction_core(3, seed);
            let d = thin_svd(&c).unwrap();
            let rec = &d.u * DenseMatrix::from_diagonal(&d.s) * d.v.transpose();
            assert!((rec - &c).norm() <= 1e-9 * c.norm(), "seed {seed}");
            assert!((d.s[0] - 500.0).abs() <= 1e-3, "seed {seed}: s0 = {}", d.s[0]);
        }
    }

    #[test]
    fn qr_bounds_on_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for seed in 0..1000u64 {
            let m = rng.random_range(1..=200usize);
            let n = rng.random_range(1..=m.min(50));
            let a = gaussian(m, n, seed);
            let (q, r) = thin_qr(&a).unwrap();
            let anorm = a.norm();
            assert!((&q * &r - &a).norm() <= 1e-12 * anorm, "reconstruction {m}x{n}");
            let ortho = (q.transpose() * &q - DenseMatrix::identity(n, n)).norm();
            assert!(ortho <= 1e-12, "orthogonality {m}x{n}: {ortho:e}");
            assert!((0..n).all(|i| r[(i, i)] >= 0.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn eig_orthonormal_and_reconstructs(n in 1usize..30, seed in any::<u64>()) {
            let c = gaussian(n, n, seed);
            let s = sym(&(&c + c.transpose()));
            let e = sym_eig(&s).unwrap();
            let v = &e.vectors;
            let ortho = (v.transpose() * v - DenseMatrix::identity(n, n)).norm();
            prop_assert!(ortho <= 1e-10);
            let rec = e.map(|x| x);
            prop_assert!((rec - &s).norm() <= 1e-10 * s.norm().max(1e-300));
            prop_assert!(e.values.as_slice().windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn exp_log_round_trip(n in 1usize..12, seed in any::<u64>(), log_cond in 0.0f64..6.0) {
            let (q, _) = thin_qr(&gaussian(n, n, seed)).unwrap();
            let vals = DVector::from_fn(n, |i, _| {
                if n == 1 { 1.0 } else { 10f64.powf(log_cond * i as f64 / (n - 1) as f64) }
            });
            let s = sym(&(&q * DenseMatrix::from_diagonal(&vals) * q.transpose()));
            let back = spd_fn(&spd_fn(&s, SpdFn::Log).unwrap(), SpdFn::Exp).unwrap();
            prop_assert!((back - &s).norm() <= 1e-9 * s.norm());
        }

        #[test]
        fn svd_reconstructs(m in 1usize..25, n in 1usize..25, seed in any::<u64>()) {
            let a = gaussian(m, n, seed);
            let d = thin_svd(&a).unwrap();
            let r = m.min(n);
            let rec = &d.u * DenseMatrix::from_diagonal(&d.s) * d.v.transpose();
            prop_assert!((rec - &a).norm() <= 1e-10 * a.norm());
            prop_assert!((d.u.transpose() * &d.u - DenseMatrix::identity(r, r)).norm() <= 1e-10);
            prop_assert!((d.v.transpose() * &d.v - DenseMatrix::identity(r, r)).norm() <= 1e-10);
            prop_assert!(d.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
