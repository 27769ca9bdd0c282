use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ProblemSpec;
use crate::error::{Error, Result};
use crate::geometries::{FixedRank, Oblique, Spd, SpdPoint, Stiefel};
use crate::linalg::{sym_eig, thin_svd};
use crate::manifold::{Manifold, PointOf};
use crate::problems::{
    brockett_problem, brockett_weights, gen_brockett, gen_matcomp, gen_maxcut, gen_spd_set, karcher_problem,
    matcomp_problem, maxcut_problem, MatCompData, ProblemInstance,
};
use crate::random::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Maxcut,
    Brockett,
    Karcher,
    Matcomp,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::Maxcut,
        ProblemKind::Brockett,
        ProblemKind::Karcher,
        ProblemKind::Matcomp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Maxcut => "maxcut",
            ProblemKind::Brockett => "brockett",
            ProblemKind::Karcher => "karcher",
            ProblemKind::Matcomp => "matcomp",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown problem '{s}'")))
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A generated benchmark instance together with the data needed to judge
/// the solution.
pub enum Instance {
    Maxcut(ProblemInstance<Oblique>),
    Brockett {
        problem: ProblemInstance<Stiefel>,
        a: DMatrix<f64>,
    },
    Karcher {
        problem: ProblemInstance<Spd>,
        first: DMatrix<f64>,
    },
    Matcomp {
        problem: ProblemInstance<FixedRank>,
        data: MatCompData,
    },
}

impl Instance {
    /// Build the instance of `spec` for `seed`.
    pub fn generate(spec: &ProblemSpec, seed: u64) -> Result<Self> {
        let mut inst = match spec.kind {
            ProblemKind::Maxcut => Instance::Maxcut(maxcut_problem(&gen_maxcut(spec.n, spec.tau, seed)?, spec.p)?),
            ProblemKind::Brockett => {
                let a = gen_brockett(spec.n, seed);
                Instance::Brockett {
                    problem: brockett_problem(a.clone(), spec.p)?,
                    a,
                }
            }
            ProblemKind::Karcher => {
                let set = gen_spd_set(spec.n, spec.m, seed)?;
                let first = set[0].clone();
                Instance::Karcher {
                    problem: karcher_problem(set)?,
                    first,
                }
            }
            ProblemKind::Matcomp => {
                let (a, omega) = gen_matcomp(spec.n, spec.m, spec.k, seed)?;
                let data = MatCompData::from_dense(&a, &omega)?;
                Instance::Matcomp {
                    problem: matcomp_problem(data.clone(), spec.k)?,
                    data,
                }
            }
        };
        inst.set_seed(seed);
        Ok(inst)
    }

    fn set_seed(&mut self, seed: u64) {
        let meta = match self {
            Instance::Maxcut(p) => &mut p.meta,
            Instance::Brockett { problem, .. } => &mut problem.meta,
            Instance::Karcher { problem, .. } => &mut problem.meta,
            Instance::Matcomp { problem, .. } => &mut problem.meta,
        };
        meta.seed = Some(seed);
    }

    /// Largest ambient dimension, the denominator of the automatic scale.
    pub fn max_dim(&self) -> usize {
        match self {
            Instance::Maxcut(p) => p.max_dim(),
            Instance::Brockett { problem, .. } => problem.max_dim(),
            Instance::Karcher { problem, .. } => problem.max_dim(),
            Instance::Matcomp { problem, .. } => problem.max_dim(),
        }
    }
}

fn random_start<M: Manifold>(p: &ProblemInstance<M>, seed: u64) -> PointOf<M> {
    p.manifold.random_point(&mut seeded_rng(seed))
}

pub(crate) fn maxcut_start(p: &ProblemInstance<Oblique>, seed: u64) -> PointOf<Oblique> {
    random_start(p, seed)
}

pub(crate) fn brockett_start(p: &ProblemInstance<Stiefel>, seed: u64) -> PointOf<Stiefel> {
    random_start(p, seed)
}

pub(crate) fn matcomp_start(p: &ProblemInstance<FixedRank>, seed: u64) -> PointOf<FixedRank> {
    random_start(p, seed)
}

/// Karcher runs start from the first member of the set.
pub(crate) fn karcher_start(p: &ProblemInstance<Spd>, first: &DMatrix<f64>) -> Result<PointOf<Spd>> {
    p.manifold.point(SpdPoint::new(first.clone())?)
}

/// `‖P_Ω(X − A)‖_F / ‖P_Ω(A)‖_F`.
pub fn matcomp_relative_residual(data: &MatCompData, x: &crate::geometries::FixedRankPoint) -> f64 {
    let obj = crate::problems::MatComp::new(data.clone()).expect("data is nonempty");
    let res = obj.residuals(x);
    res.iter().map(|r| r * r).sum::<f64>().sqrt() / data.observed_norm()
}

/// Distance of a Stiefel point from the optimal Brockett configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrockettCheck {
    /// Largest principal angle between span(X) and the invariant subspace
    /// of the `p` smallest eigenvalues.
    pub subspace_angle: f64,
    /// `|f(X) − f*| / |f*|` with `f* = Σ_j w_j λ_j`, weights in decreasing
    /// order paired with eigenvalues in increasing order.
    pub f_rel_err: f64,
    pub f_star: f64,
}

pub fn brockett_check(a: &DMatrix<f64>, x: &DMatrix<f64>, f: f64) -> Result<BrockettCheck> {
    let p = x.ncols();
    let eig = sym_eig(a)?;
    let u = eig.vectors.columns(0, p).into_owned();
    let w = brockett_weights(p);
    let f_star: f64 = (0..p).map(|j| w[j] * eig.values[j]).sum();
    let off = x - &u * (u.transpose() * x);
    let sin_max = thin_svd(&off)?.s.iter().cloned().fold(0.0, f64::max).min(1.0);
    Ok(BrockettCheck {
        subspace_angle: sin_max.asin(),
        f_rel_err: (f - f_star).abs() / f_star.abs().max(f64::MIN_POSITIVE),
        f_star,
    })
}

/// Everything needed to regenerate an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceHeader {
    pub problem: ProblemKind,
    pub dims: Vec<usize>,
    pub spec: ProblemSpec,
    pub seed: u64,
    /// Automatic scale `1/max(dims)`.
    pub scale: f64,
}

impl InstanceHeader {
    pub fn new(spec: &ProblemSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let inst = Instance::generate(spec, seed)?;
        Ok(InstanceHeader {
            problem: spec.kind,
            dims: spec.dims(),
            spec: spec.clone(),
            seed,
            scale: 1.0 / inst.max_dim() as f64,
        })
    }

    pub fn instantiate(&self) -> Result<Instance> {
        Instance::generate(&self.spec, self.seed)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let h: InstanceHeader = serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        h.spec.validate()?;
        if h.problem != h.spec.kind {
            return Err(Error::InvalidInput("header problem disagrees with its spec".into()));
        }
        Ok(h)
    }
}
