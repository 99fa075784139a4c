//! Unit-sphere primitives.
//!
//! Square-root densities live on the unit sphere `S^m` embedded in
//! `R^{m+1}`. Tangent vectors are stored in ambient coordinates, so the
//! tangent space at `x` is simply the hyperplane `{z : z·x = 0}` and its
//! metric is the ambient dot product.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Inner products at or below `-1 + ANTIPODAL_EPS` are treated as antipodal.
pub const ANTIPODAL_EPS: f64 = 1e-8;

/// Below this norm a tangent vector (or the residual `y - (x·y)x`) is zero.
pub const ZERO_NORM: f64 = 1e-12;

/// A unit vector on `S^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint<T: Real> {
    coords: DVector<T>,
}

impl<T: Real> SpherePoint<T> {
    /// Validates that `coords` is finite and has unit norm.
    pub fn new(coords: DVector<T>) -> Result<Self> {
        check_finite(coords.iter())?;
        let norm = coords.norm();
        if (norm - T::one()).abs() > T::tol(1e-10) {
            return Err(Error::NotUnit { norm: norm.as_f64() });
        }
        Ok(Self { coords })
    }

    /// Scales a nonzero finite vector onto the sphere.
    pub fn normalize(coords: DVector<T>) -> Result<Self> {
        check_finite(coords.iter())?;
        let norm = coords.norm();
        if norm <= T::zero() {
            return Err(Error::NotUnit { norm: 0.0 });
        }
        Ok(Self { coords: coords / norm })
    }

    pub fn from_slice(coords: &[T]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    /// The `i`-th standard basis vector of `R^dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut coords = DVector::zeros(dim);
        coords[i] = T::one();
        Self { coords }
    }

    #[inline]
    pub fn coords(&self) -> &DVector<T> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<T> {
        self.coords
    }

    /// Ambient dimension `m + 1`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> T {
        self.coords.dot(&other.coords)
    }
}

/// A vector in the tangent space at `base`, in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector<T: Real> {
    base: SpherePoint<T>,
    vec: DVector<T>,
}

impl<T: Real> TangentVector<T> {
    /// Validates `vec ⊥ base` up to `1e-9 · |vec|`.
    pub fn new(base: SpherePoint<T>, vec: DVector<T>) -> Result<Self> {
        if vec.len() != base.dim() {
            return Err(Error::Dimension { expected: base.dim(), found: vec.len() });
        }
        check_finite(vec.iter())?;
        let dot = vec.dot(base.coords());
        if dot.abs() > T::tol(1e-9) * vec.norm() {
            return Err(Error::NotTangent { dot: dot.as_f64() });
        }
        Ok(Self { base, vec })
    }

    /// Orthogonal projection of an ambient vector onto the tangent space.
    pub fn project(base: SpherePoint<T>, ambient: &DVector<T>) -> Result<Self> {
        if ambient.len() != base.dim() {
            return Err(Error::Dimension { expected: base.dim(), found: ambient.len() });
        }
        let along = ambient.dot(base.coords());
        let vec = ambient - base.coords() * along;
        Ok(Self { base, vec })
    }

    pub fn zero(base: SpherePoint<T>) -> Self {
        let vec = DVector::zeros(base.dim());
        Self { base, vec }
    }

    #[inline]
    pub fn base(&self) -> &SpherePoint<T> {
        &self.base
    }

    #[inline]
    pub fn vec(&self) -> &DVector<T> {
        &self.vec
    }

    pub fn into_vec(self) -> DVector<T> {
        self.vec
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.vec.norm()
    }
}

fn check_finite<'a, T: Real>(mut values: impl Iterator<Item = &'a T>) -> Result<()> {
    if values.all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// `arccos(x·y)` for unit vectors, evaluated as `2·atan2(|x-y|, |x+y|)`,
/// which stays accurate where `arccos` loses half its digits (near 0 and π).
fn angle_between<T: Real>(x: &DVector<T>, y: &DVector<T>) -> T {
    let two = T::lit(2.0);
    two * (x - y).norm().atan2((x + y).norm())
}

/// Great-circle distance `arccos(x·y)`, in `[0, π]`.
pub fn geodesic_distance<T: Real>(x: &SpherePoint<T>, y: &SpherePoint<T>) -> T {
    angle_between(x.coords(), y.coords())
}

/// Ambient coordinates of `log_x(y)`. Shared by [`log_map`] and the Gram
/// construction, which needs the raw vectors without wrapping each one.
pub(crate) fn log_coords<T: Real>(x: &DVector<T>, y: &DVector<T>) -> Result<DVector<T>> {
    let c = x.dot(y);
    if c <= T::lit(ANTIPODAL_EPS) - T::one() {
        return Err(Error::Antipodal { dot: c.as_f64() });
    }
    let u = y - x * c;
    let u_norm = u.norm();
    if u_norm < T::lit(ZERO_NORM) {
        return Ok(DVector::zeros(x.len()));
    }
    Ok(u * (angle_between(x, y) / u_norm))
}

/// Logarithm map `log_x(y) = u·arccos(x·y)/|u|` with `u = y - (x·y)x`.
///
/// Returns the zero vector when `y ≈ x` and [`Error::Antipodal`] when the
/// map is undefined.
pub fn log_map<T: Real>(x: &SpherePoint<T>, y: &SpherePoint<T>) -> Result<TangentVector<T>> {
    if x.dim() != y.dim() {
        return Err(Error::Dimension { expected: x.dim(), found: y.dim() });
    }
    let vec = log_coords(x.coords(), y.coords())?;
    Ok(TangentVector { base: x.clone(), vec })
}

/// Exponential map `exp_x(v) = cos|v|·x + sin|v|·v/|v|`, renormalized.
pub fn exp_map<T: Real>(v: &TangentVector<T>) -> SpherePoint<T> {
    let t = v.norm();
    let x = v.base.coords();
    if t < T::lit(ZERO_NORM) {
        return v.base.clone();
    }
    let p = x * t.cos() + &v.vec * (t.sin() / t);
    let norm = p.norm();
    SpherePoint { coords: p / norm }
}

/// Riemannian metric at a common base point (the ambient dot product).
pub fn tangent_inner<T: Real>(a: &TangentVector<T>, b: &TangentVector<T>) -> Result<T> {
    if a.base.dim() != b.base.dim() {
        return Err(Error::Dimension { expected: a.base.dim(), found: b.base.dim() });
    }
    let gap = (a.base.coords() - b.base.coords()).amax();
    if gap > T::tol(1e-10) {
        return Err(Error::BaseMismatch);
    }
    Ok(a.vec.dot(&b.vec))
}
