//! Floating-point scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the engine is generic over: `f32` or `f64`.
///
/// Accuracy targets quoted throughout the crate (1e-10 for the normal CDF,
/// 1e-8 for Hermite integrals, ...) refer to `f64`; `f32` instantiations
/// run the same algorithms at single precision.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon as a plain `f64`, used to scale tolerances.
    fn eps_f64() -> f64 {
        Self::epsilon().to_f64_lossy()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// π^{-1/4}, the uniform bound on |h_k(x)|.
#[inline]
pub fn pi_pow_neg_quarter<T: Scalar>() -> T {
    T::PI().powf(T::lit(-0.25))
}
