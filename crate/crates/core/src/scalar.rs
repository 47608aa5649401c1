//! Storage scalar for factor matrices.
//!
//! Factor entries may be stored as `f32` or `f64`; every preference, gradient
//! and likelihood is evaluated in `f64` regardless of the storage type.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type usable as factor storage.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + FromStr + Send + Sync + 'static
{
    /// Widen to the `f64` working precision.
    fn widen(self) -> f64;

    /// Narrow from the `f64` working precision (rounding to nearest).
    fn narrow(value: f64) -> Self;
}

impl Scalar for f64 {
    #[inline(always)]
    fn widen(self) -> f64 {
        self
    }

    #[inline(always)]
    fn narrow(value: f64) -> Self {
        value
    }
}

impl Scalar for f32 {
    #[inline(always)]
    fn widen(self) -> f64 {
        self as f64
    }

    #[inline(always)]
    fn narrow(value: f64) -> Self {
        value as f32
    }
}
