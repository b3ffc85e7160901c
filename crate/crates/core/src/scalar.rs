//! Scalar abstractions.
//!
//! The numerics (mesh, assembly, solvers, norms) are written against [`Real`],
//! which is implemented for `f32` and `f64`. Exponent algebra is written
//! against [`ExponentScalar`], implemented for exact rationals and for `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Floating-point scalar used by every numerical module.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the type cannot represent finite values.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits in a float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Field scalar for the exponent algebra.
///
/// `same` is exact equality for rationals and a tight relative comparison
/// for floats, so the identity checks run unchanged over both.
pub trait ExponentScalar:
    Clone
    + PartialOrd
    + Debug
    + Display
    + Zero
    + One
    + Signed
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
{
    fn from_ratio(numer: i64, denom: i64) -> Self;
    fn to_f64_lossy(&self) -> f64;
    fn same(&self, other: &Self) -> bool;
    /// Whether the value is an exact representation (rationals) or rounded (floats).
    fn is_exact() -> bool;

    fn from_int(n: i64) -> Self {
        Self::from_ratio(n, 1)
    }

    fn recip(&self) -> Self {
        Self::one() / self.clone()
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }
}

impl ExponentScalar for BigRational {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn same(&self, other: &Self) -> bool {
        self == other
    }

    fn is_exact() -> bool {
        true
    }
}

impl ExponentScalar for f64 {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f64 / denom as f64
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }

    fn same(&self, other: &Self) -> bool {
        let scale = self.abs().max(other.abs()).max(1.0);
        (self - other).abs() <= 64.0 * f64::EPSILON * scale
    }

    fn is_exact() -> bool {
        false
    }
}
