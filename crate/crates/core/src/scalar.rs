//! Scalar abstraction shared by the numeric parts of the toolkit.
//!
//! Fusion, drift windows, target allocation and the binomial rate bound are
//! written against [`Scalar`] so they run unchanged on `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable by the monitor and the statistics kernels.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Display
    + Debug
    + FromStr
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Absolute tolerance used when checking that fractions sum to one.
pub fn unit_sum_tolerance<T: Scalar>() -> T {
    // f32 cannot resolve 1e-9 around 1.0; fall back to a few ulps there.
    T::lit(1e-9).max(T::epsilon() * T::lit(8.0))
}
