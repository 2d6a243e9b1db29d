//! Scalar abstractions.
//!
//! [`Scalar`] covers everything that only needs field arithmetic and an
//! ordering: Chebyshev recurrences, dense LU, generator assembly and the
//! closed-form stationary moments. These run on `f32`, `f64` and on
//! [`BigRational`] for exact oracles. [`Real`] adds the transcendental
//! functions needed by the spectral and dynamical code.

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};

/// Field-like scalar: `f32`, `f64` or an exact rational.
pub trait Scalar:
    Num + Neg<Output = Self> + Clone + Debug + PartialOrd + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `true` when arithmetic is exact (no rounding, no overflow).
    const EXACT: bool;

    /// Absolute value.
    fn magnitude(&self) -> Self;

    /// Values beyond this magnitude are treated as overflow by recurrences.
    /// `None` for exact types.
    fn overflow_threshold() -> Option<Self>;

    /// Conversion of a float literal (tolerances, user input).
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("integer conversion")
    }

    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer conversion")
    }

    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if a <= b {
            a
        } else {
            b
        }
    }
}

/// Floating-point scalar with transcendental functions.
pub trait Real: Scalar + Float + FloatConst + Copy {}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn magnitude(&self) -> Self {
        self.abs()
    }

    fn overflow_threshold() -> Option<Self> {
        Some(1e300)
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn magnitude(&self) -> Self {
        self.abs()
    }

    fn overflow_threshold() -> Option<Self> {
        Some(1e36)
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn magnitude(&self) -> Self {
        if *self < BigRational::from_integer(BigInt::from(0)) {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn overflow_threshold() -> Option<Self> {
        None
    }
}

impl Real for f64 {}
impl Real for f32 {}

/// Exact rational `a / b`.
pub fn ratio(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}
