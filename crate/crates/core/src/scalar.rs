//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating-point scalar usable by the geometry, solver and clustering code.
///
/// Implemented for `f32` and `f64`. Tolerances that only make sense for a
/// given precision are exposed through [`Real::tol`].
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Send + Sync + 'static
{
    /// Machine epsilon of the type, as a multiple of which precision-dependent
    /// tolerances are expressed.
    const EPSILON: Self;

    /// Converts an `f64` literal. Never fails for finite inputs.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal")
    }

    /// Lossy conversion used for reporting and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Returns `want` for `f64`, loosened to a precision-appropriate value
    /// for narrower types (never tighter than `1e3 * EPSILON`).
    #[inline]
    fn tol(want: f64) -> Self {
        let floor = Self::EPSILON.as_f64() * 1e3;
        Self::lit(want.max(floor))
    }
}

impl Real for f32 {
    const EPSILON: Self = f32::EPSILON;
}

impl Real for f64 {
    const EPSILON: Self = f64::EPSILON;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerances_scale_with_precision() {
        assert_eq!(<f64 as Real>::tol(1e-10), 1e-10);
        assert!(<f32 as Real>::tol(1e-10) > 1e-5);
        assert_eq!(<f64 as Real>::lit(0.25).as_f64(), 0.25);
    }
}
