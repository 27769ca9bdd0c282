//! Benchmark objectives and their seeded instance generators.
//!
//! Every objective is minimized; maximization problems are negated once at
//! construction.

mod brockett;
mod karcher;
mod matcomp;
mod maxcut;
mod rayleigh;

pub use brockett::{brockett_problem, brockett_weights, gen_brockett, Brockett};
pub use karcher::{gen_spd_set, karcher_problem, Karcher};
pub use matcomp::{gen_matcomp, matcomp_problem, sampling_ratio, MatComp, MatCompData};
pub use maxcut::{gen_maxcut, maxcut_problem, MaxCut};
pub use rayleigh::{rayleigh_problem, Rayleigh};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Manifold, PointOf, TangentOf};

/// A smooth cost on a manifold together with its gradient.
pub trait Objective<M: Manifold>: Send + Sync {
    fn cost(&self, x: &M::Repr) -> Result<f64>;

    /// Euclidean gradient of the cost in the ambient space.
    fn egrad(&self, x: &M::Repr) -> Result<M::Ambient>;

    /// Riemannian gradient. Defaults to converting the Euclidean gradient.
    fn rgrad(&self, manifold: &M, x: &M::Repr) -> Result<M::Vector> {
        Ok(manifold.egrad_to_rgrad_at(x, &self.egrad(x)?))
    }
}

/// Descriptive metadata of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub name: String,
    pub dims: Vec<usize>,
    pub seed: Option<u64>,
}

/// A manifold, an objective on it, and metadata.
pub struct ProblemInstance<M: Manifold> {
    pub manifold: M,
    pub objective: Box<dyn Objective<M>>,
    pub meta: ProblemMeta,
}

impl<M: Manifold> std::fmt::Debug for ProblemInstance<M> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("manifold", &self.manifold)
            .field("meta", &self.meta)
            .finish()
    }
}

impl<M: Manifold> ProblemInstance<M> {
    pub fn new(manifold: M, objective: impl Objective<M> + 'static, meta: ProblemMeta) -> Self {
        ProblemInstance {
            manifold,
            objective: Box::new(objective),
            meta,
        }
    }

    pub fn cost(&self, x: &PointOf<M>) -> Result<f64> {
        self.objective.cost(x.repr())
    }

    pub fn gradient(&self, x: &PointOf<M>) -> Result<TangentOf<M>> {
        Ok(self
            .manifold
            .tangent(x, self.objective.rgrad(&self.manifold, x.repr())?))
    }

    pub fn egrad(&self, x: &PointOf<M>) -> Result<M::Ambient> {
        self.objective.egrad(x.repr())
    }

    /// Largest ambient dimension, the default scaling denominator.
    pub fn max_dim(&self) -> usize {
        self.manifold.dims().into_iter().max().unwrap_or(1)
    }
}

pub(crate) fn check_symmetric(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!("{what} must be square")));
    }
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} has non-finite entries")));
    }
    let asym = (a - a.transpose()).norm();
    if asym > 1e-12 * a.norm().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "{what} is not symmetric (||A - A^T||_F = {asym:e})"
        )));
    }
    Ok(())
}
