use num_traits::{Float, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display, LowerExp};

/// Floating point type the numeric kernels are written against.
///
/// Implemented for `f32` and `f64`. The analyzer runs on `f64`; the solver and
/// unit conversions accept either so that callers embedding them in a
/// single-precision pipeline do not need to widen their data.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + Default + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Stationarity tolerance used by the non-negative least squares solver
    /// when the caller does not supply one.
    fn default_kkt_tol() -> Self;

    /// Relative pivot threshold below which a column is treated as linearly
    /// dependent on the columns already in the passive set.
    fn pivot_tol() -> Self;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl Scalar for f64 {
    fn default_kkt_tol() -> Self {
        1e-9
    }

    fn pivot_tol() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn default_kkt_tol() -> Self {
        1e-4
    }

    fn pivot_tol() -> Self {
        1e-6
    }
}
