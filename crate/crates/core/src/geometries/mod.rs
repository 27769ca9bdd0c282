//! Concrete geometries: oblique/sphere, Stiefel, SPD, fixed-rank, and flat space.

mod euclidean;
mod fixed_rank;
mod oblique;
mod spd;
mod stiefel;

pub use euclidean::Euclidean;
pub use fixed_rank::{FixedRank, FixedRankAmbient, FixedRankPoint, FixedRankTangent, SparseMatrix};
pub use oblique::Oblique;
pub use spd::{Spd, SpdPoint};
pub use stiefel::Stiefel;

use nalgebra::DMatrix;

pub(crate) fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub(crate) fn is_all_zero(a: &DMatrix<f64>) -> bool {
    a.iter().all(|&x| x == 0.0)
}
