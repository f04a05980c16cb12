//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All model math is written against [`Scalar`] so the same code runs in
//! `f32` and `f64`. Random draws are made in `f64` and converted, which keeps
//! seeded streams identical across precisions.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for the supported types.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `(1 - e^{-x}) / x`, continuous at zero.
pub fn one_minus_exp_over<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(1e-8) {
        T::one() - x / T::lit(2.0)
    } else {
        -(-x).exp_m1() / x
    }
}

/// Relative closeness used for constraint checks such as `sum(rho) == R`.
pub fn approx_eq_rel<T: Scalar>(a: T, b: T, rel: T) -> bool {
    let scale = a.abs().max(b.abs()).max(T::min_positive_value());
    (a - b).abs() <= rel * scale
}
