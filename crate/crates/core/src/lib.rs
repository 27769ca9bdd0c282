//! Riemannian Anderson mixing (RAM) and its regularized variant (RRAM),
//! together with baseline solvers, manifold geometries, benchmark problems,
//! an experiment harness and numerical verification probes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod geometries;
pub mod harness;
pub mod linalg;
pub mod manifold;
pub mod mixing;
pub mod parallel;
pub mod problems;
pub mod random;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use manifold::{Manifold, Point, PointId, PointOf, Tangent, TangentOf, TangentVector};
