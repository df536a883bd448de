//! Numeric abstraction shared by the evaluation code.
//!
//! Everything in [`crate::decision`], [`crate::methods`] and
//! [`crate::pathplan`] is written against [`Scalar`], so the same routines
//! run in `f64` for production use and in exact rationals for checking.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A real-like number type usable for probabilities and utilities.
///
/// Exact types report a zero tolerance, so comparisons and tie detection
/// are exact for them.
pub trait Scalar:
    Num + FromPrimitive + ToPrimitive + Clone + PartialOrd + Debug + Display + Send + Sync + 'static
{
    /// Slack used when comparing utilities and detecting ties.
    fn tolerance() -> Self;

    /// Slack used when checking that masses sum to one.
    fn mass_tolerance() -> Self;

    /// False for NaN and infinities. Always true for exact types.
    fn is_finite_value(&self) -> bool;

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn abs_value(&self) -> Self {
        if *self < Self::zero() {
            Self::zero() - self.clone()
        } else {
            self.clone()
        }
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }
    fn mass_tolerance() -> Self {
        1e-9
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-4
    }
    fn mass_tolerance() -> Self {
        1e-5
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Rational64 {
    fn tolerance() -> Self {
        Rational64::from_integer(0)
    }
    fn mass_tolerance() -> Self {
        Rational64::from_integer(0)
    }
    fn is_finite_value(&self) -> bool {
        true
    }
}

impl Scalar for BigRational {
    fn tolerance() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
    fn mass_tolerance() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
    fn is_finite_value(&self) -> bool {
        true
    }
}

/// `|a - b| <= tolerance`.
pub fn approx_eq<T: Scalar>(a: &T, b: &T) -> bool {
    (a.clone() - b.clone()).abs_value() <= T::tolerance()
}

/// `a > b` by more than the tolerance.
pub fn definitely_greater<T: Scalar>(a: &T, b: &T) -> bool {
    a.clone() > b.clone() + T::tolerance()
}

pub(crate) fn sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}
