//! Scalar abstractions.
//!
//! Queue bookkeeping only needs ring arithmetic and an order, so it is written
//! against [`Fluid`], which exact rationals satisfy. Anything that evaluates a
//! utility, takes a square root or bisects needs [`Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::num::ParseFloatError;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, Num};

/// Ordered ring-like quantity: fluid amounts of data, capacities, backlogs.
pub trait Fluid: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {}

impl<T> Fluid for T where T: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {}

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Fluid + Float + FromPrimitive + Display + FromStr<Err = ParseFloatError> + Sum + Default
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("literal representable in scalar type")
}

/// Widens `T` to `f64` for reporting.
#[inline]
pub fn wide<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn fmax<T: Fluid>(a: T, b: T) -> T {
    if a >= b {
        a
    } else {
        b
    }
}

pub(crate) fn fmin<T: Fluid>(a: T, b: T) -> T {
    if a <= b {
        a
    } else {
        b
    }
}

pub(crate) fn fabs<T: Fluid>(a: T) -> T {
    if a < T::zero() {
        T::zero() - a
    } else {
        a
    }
}
