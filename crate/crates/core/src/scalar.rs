//! Floating-point abstraction shared by the analytic side of the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the quadrature kernels and analytic evaluators are generic over.
///
/// Implemented for `f32` and `f64`. The simulation side of the crate is fixed
/// to `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts decibels to a linear power ratio.
#[inline]
pub fn db_to_linear<F: Scalar>(db: F) -> F {
    F::lit(10.0).powf(db / F::lit(10.0))
}

/// Converts a linear power ratio to decibels.
#[inline]
pub fn linear_to_db<F: Scalar>(lin: F) -> F {
    F::lit(10.0) * lin.log10()
}
