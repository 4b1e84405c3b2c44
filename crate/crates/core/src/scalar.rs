use std::fmt::{Debug, Display};

use num_traits::Float;

/// Floating-point scalar the numeric core is generic over.
///
/// Everything numeric in this crate (kernels, factorizations, experts,
/// aggregation) is written against this trait; `f32` and `f64` both
/// satisfy it. Concrete `f64` aliases live at the crate root.
pub trait Scalar: Float + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` constant into the scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("f64 constant convertible to scalar")
    }

    /// Widens the scalar to `f64` (lossless for the supported types).
    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar convertible to f64")
    }

    /// Converts a `usize` count into the scalar type.
    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::of(v as f64)
    }
}

impl<T> Scalar for T where T: Float + Debug + Display + Send + Sync + 'static {}
