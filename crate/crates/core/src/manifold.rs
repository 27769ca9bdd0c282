//! The manifold contract consumed by every solver.
//!
//! A [`Manifold`] implements raw operations on its own representation types
//! (`*_at` methods). Solvers go through the checked wrappers, which work on
//! [`Point`] and [`Tangent`] values: a tangent remembers the id of the point
//! it is based at, and every wrapper refuses mismatched bases.

use std::fmt::Debug;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::error::{Error, Result};

/// Identifier of a concrete point value. Tangents carry the id of their base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PointId(u64);

static NEXT_POINT_ID: AtomicU64 = AtomicU64::new(1);

impl PointId {
    fn fresh() -> Self {
        PointId(NEXT_POINT_ID.fetch_add(1, Ordering::Relaxed))
    }
}

/// A validated point on some manifold. Cloning is cheap and keeps the id.
#[derive(Debug)]
pub struct Point<R> {
    id: PointId,
    repr: Arc<R>,
}

impl<R> Clone for Point<R> {
    fn clone(&self) -> Self {
        Point {
            id: self.id,
            repr: Arc::clone(&self.repr),
        }
    }
}

impl<R> Point<R> {
    pub(crate) fn from_repr(repr: R) -> Self {
        Point {
            id: PointId::fresh(),
            repr: Arc::new(repr),
        }
    }

    pub fn id(&self) -> PointId {
        self.id
    }

    pub fn repr(&self) -> &R {
        &self.repr
    }
}

/// Linear-space operations on tangent coordinates.
pub trait TangentVector: Clone + Debug + Send + Sync {
    fn scale_mut(&mut self, a: f64);
    /// `self += a * x`
    fn axpy_mut(&mut self, a: f64, x: &Self);
    fn zeros_like(&self) -> Self;
}

impl TangentVector for DMatrix<f64> {
    fn scale_mut(&mut self, a: f64) {
        *self *= a;
    }

    fn axpy_mut(&mut self, a: f64, x: &Self) {
        self.zip_apply(x, |s, xv| *s += a * xv);
    }

    fn zeros_like(&self) -> Self {
        DMatrix::zeros(self.nrows(), self.ncols())
    }
}

/// A tangent vector together with the id of its base point.
#[derive(Debug, Clone)]
pub struct Tangent<V> {
    base: PointId,
    coords: V,
}

impl<V: TangentVector> Tangent<V> {
    pub(crate) fn new(base: PointId, coords: V) -> Self {
        Tangent { base, coords }
    }

    pub fn base(&self) -> PointId {
        self.base
    }

    pub fn coords(&self) -> &V {
        &self.coords
    }

    pub fn into_coords(self) -> V {
        self.coords
    }

    pub fn is_based_at<R>(&self, x: &Point<R>) -> bool {
        self.base == x.id
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coords.scale_mut(a);
        out
    }

    pub fn scale_mut(&mut self, a: f64) {
        self.coords.scale_mut(a);
    }

    /// `self += a * x`. Panics when the two vectors live in different tangent spaces.
    pub fn axpy_mut(&mut self, a: f64, x: &Self) {
        assert_eq!(self.base, x.base, "tangent arithmetic across tangent spaces");
        self.coords.axpy_mut(a, &x.coords);
    }

    pub fn add(&self, x: &Self) -> Self {
        let mut out = self.clone();
        out.axpy_mut(1.0, x);
        out
    }

    pub fn sub(&self, x: &Self) -> Self {
        let mut out = self.clone();
        out.axpy_mut(-1.0, x);
        out
    }

    pub fn zeros_like(&self) -> Self {
        Tangent {
            base: self.base,
            coords: self.coords.zeros_like(),
        }
    }
}

/// A Riemannian manifold with a retraction and an associated vector transport.
///
/// Implementors provide the raw `*_at` methods; callers should prefer the
/// checked wrappers (`inner`, `retract`, `transport`, ...).
pub trait Manifold: Debug + Send + Sync {
    /// Point representation.
    type Repr: Clone + Debug + Send + Sync;
    /// Tangent-vector coordinates.
    type Vector: TangentVector;
    /// Representation of Euclidean gradients in the ambient space.
    type Ambient: Debug + Send + Sync;

    fn name(&self) -> &'static str;

    /// Ambient dimensions of a point (e.g. `[rows, cols]`).
    fn dims(&self) -> Vec<usize>;

    fn intrinsic_dim(&self) -> usize;

    /// Feasibility check of a raw representation.
    fn validate(&self, x: &Self::Repr) -> Result<()>;

    fn inner_at(&self, x: &Self::Repr, u: &Self::Vector, v: &Self::Vector) -> f64;

    /// Orthogonal projection of an ambient array onto `T_x M`.
    fn proj_at(&self, x: &Self::Repr, a: &Self::Ambient) -> Self::Vector;

    fn retract_at(&self, x: &Self::Repr, v: &Self::Vector) -> Result<Self::Repr>;

    /// Transport `u ∈ T_x M` to `T_y M` where `y = R_x(d)` for some `d`.
    fn transport_at(&self, x: &Self::Repr, y: &Self::Repr, u: &Self::Vector)
        -> Result<Self::Vector>;

    fn egrad_to_rgrad_at(&self, x: &Self::Repr, g: &Self::Ambient) -> Self::Vector;

    fn zero_at(&self, x: &Self::Repr) -> Self::Vector;

    /// Coordinates of `v` in an isometric embedding of `T_x M` into `R^N`:
    /// `inner_at(x, u, v) == coords(u) · coords(v)`.
    fn isometric_coords(&self, x: &Self::Repr, v: &Self::Vector) -> DVector<f64>;

    /// Dense ambient representation of a point.
    fn embed_point(&self, x: &Self::Repr) -> DMatrix<f64>;

    /// Dense ambient representation of a tangent vector.
    fn embed_tangent(&self, x: &Self::Repr, v: &Self::Vector) -> DMatrix<f64>;

    /// Convert a dense ambient matrix into this manifold's ambient type.
    fn ambient_from_dense(&self, a: DMatrix<f64>) -> Self::Ambient;

    fn random_repr(&self, rng: &mut dyn RngCore) -> Self::Repr;

    /// A random tangent vector at `x` (not normalized).
    fn random_vector_at(&self, x: &Self::Repr, rng: &mut dyn RngCore) -> Self::Vector;

    fn parallel_transport_at(
        &self,
        _x: &Self::Repr,
        _y: &Self::Repr,
        _u: &Self::Vector,
    ) -> Result<Self::Vector> {
        Err(Error::Unsupported {
            op: "parallel transport",
            geometry: self.name(),
        })
    }

    fn dist_at(&self, _x: &Self::Repr, _y: &Self::Repr) -> Result<f64> {
        Err(Error::Unsupported {
            op: "distance",
            geometry: self.name(),
        })
    }

    fn exp_at(&self, _x: &Self::Repr, _v: &Self::Vector) -> Result<Self::Repr> {
        Err(Error::Unsupported {
            op: "exponential map",
            geometry: self.name(),
        })
    }

    // ---- checked wrappers ----

    /// Validate a representation and wrap it as a point.
    fn point(&self, repr: Self::Repr) -> Result<Point<Self::Repr>> {
        self.validate(&repr)?;
        Ok(Point::from_repr(repr))
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Point<Self::Repr> {
        Point::from_repr(self.random_repr(rng))
    }

    fn random_tangent(
        &self,
        x: &Point<Self::Repr>,
        rng: &mut dyn RngCore,
    ) -> Tangent<Self::Vector> {
        Tangent::new(x.id(), self.random_vector_at(x.repr(), rng))
    }

    /// Wrap raw coordinates as a tangent at `x` (projection is the caller's job).
    fn tangent(&self, x: &Point<Self::Repr>, coords: Self::Vector) -> Tangent<Self::Vector> {
        Tangent::new(x.id(), coords)
    }

    fn zero_tangent(&self, x: &Point<Self::Repr>) -> Tangent<Self::Vector> {
        Tangent::new(x.id(), self.zero_at(x.repr()))
    }

    fn inner(
        &self,
        x: &Point<Self::Repr>,
        u: &Tangent<Self::Vector>,
        v: &Tangent<Self::Vector>,
    ) -> Result<f64> {
        check_base(x, u)?;
        check_base(x, v)?;
        Ok(self.inner_at(x.repr(), u.coords(), v.coords()))
    }

    fn norm(&self, x: &Point<Self::Repr>, u: &Tangent<Self::Vector>) -> Result<f64> {
        Ok(self.inner(x, u, u)?.max(0.0).sqrt())
    }

    fn proj(&self, x: &Point<Self::Repr>, a: &Self::Ambient) -> Tangent<Self::Vector> {
        Tangent::new(x.id(), self.proj_at(x.repr(), a))
    }

    fn retract(
        &self,
        x: &Point<Self::Repr>,
        v: &Tangent<Self::Vector>,
    ) -> Result<Point<Self::Repr>> {
        check_base(x, v)?;
        Ok(Point::from_repr(self.retract_at(x.repr(), v.coords())?))
    }

    /// Transport `u` along the retraction curve of `d`; returns `(R_x(d), T_d u)`.
    fn transport(
        &self,
        x: &Point<Self::Repr>,
        d: &Tangent<Self::Vector>,
        u: &Tangent<Self::Vector>,
    ) -> Result<(Point<Self::Repr>, Tangent<Self::Vector>)> {
        let y = self.retract(x, d)?;
        let tu = self.transport_to(x, &y, u)?;
        Ok((y, tu))
    }

    /// Transport `u ∈ T_x M` to `T_y M`, where `y` was produced by retracting from `x`.
    fn transport_to(
        &self,
        x: &Point<Self::Repr>,
        y: &Point<Self::Repr>,
        u: &Tangent<Self::Vector>,
    ) -> Result<Tangent<Self::Vector>> {
        check_base(x, u)?;
        if x.id() == y.id() {
            return Ok(u.clone());
        }
        Ok(Tangent::new(
            y.id(),
            self.transport_at(x.repr(), y.repr(), u.coords())?,
        ))
    }

    fn parallel_transport(
        &self,
        x: &Point<Self::Repr>,
        y: &Point<Self::Repr>,
        u: &Tangent<Self::Vector>,
    ) -> Result<Tangent<Self::Vector>> {
        check_base(x, u)?;
        Ok(Tangent::new(
            y.id(),
            self.parallel_transport_at(x.repr(), y.repr(), u.coords())?,
        ))
    }

    fn egrad2rgrad(&self, x: &Point<Self::Repr>, g: &Self::Ambient) -> Tangent<Self::Vector> {
        Tangent::new(x.id(), self.egrad_to_rgrad_at(x.repr(), g))
    }

    fn dist(&self, x: &Point<Self::Repr>, y: &Point<Self::Repr>) -> Result<f64> {
        if x.id() == y.id() {
            return Ok(0.0);
        }
        self.dist_at(x.repr(), y.repr())
    }

    fn exp(
        &self,
        x: &Point<Self::Repr>,
        v: &Tangent<Self::Vector>,
    ) -> Result<Point<Self::Repr>> {
        check_base(x, v)?;
        Ok(Point::from_repr(self.exp_at(x.repr(), v.coords())?))
    }
}

pub(crate) fn check_base<R, V: TangentVector>(x: &Point<R>, u: &Tangent<V>) -> Result<()> {
    if u.is_based_at(x) {
        Ok(())
    } else {
        Err(Error::BaseMismatch)
    }
}

/// Point type of a manifold.
pub type PointOf<M> = Point<<M as Manifold>::Repr>;
/// Tangent type of a manifold.
pub type TangentOf<M> = Tangent<<M as Manifold>::Vector>;
