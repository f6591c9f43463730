//! Scalar abstraction shared by the numerical kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar the solvers are generic over: `f32` or `f64`.
///
/// The tolerances are per-type because a threshold that is comfortable in
/// double precision is below the rounding floor of single precision.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Relative pivot threshold used by the extremal-system solver.
    fn pivot_tolerance() -> Self;

    /// Absolute slack added to `epsilon` when classifying residuals, and the
    /// residual bound a successful extremal solve must meet.
    fn residual_slack() -> Self;

    /// Lossy conversion from an `f64` literal or parameter.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real types convert to f64")
    }
}

impl Real for f64 {
    #[inline]
    fn pivot_tolerance() -> Self {
        1e-9
    }

    #[inline]
    fn residual_slack() -> Self {
        1e-9
    }
}

impl Real for f32 {
    #[inline]
    fn pivot_tolerance() -> Self {
        1e-5
    }

    #[inline]
    fn residual_slack() -> Self {
        1e-5
    }
}
