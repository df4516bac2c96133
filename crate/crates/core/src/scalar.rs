//! Scalar field abstraction.
//!
//! Everything in the engine is generic over a [`Scalar`]. The exact
//! instantiation is [`Rational`](crate::Rational) (arbitrary-precision
//! rationals); `f64` is supported for quick exploratory runs but none of
//! the identities are guaranteed to hold bit-exactly there.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, NumRef, Signed, ToPrimitive, Zero};

/// A field of characteristic zero usable as coefficient scalar.
pub trait Scalar:
    Clone + Debug + Display + PartialEq + Num + NumRef + std::ops::Neg<Output = Self> + FromPrimitive
    + FromStr + Send + Sync + 'static
{
    /// True when arithmetic never rounds.
    const EXACT: bool;

    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer fits the scalar type")
    }

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    fn to_f64(&self) -> f64;

    fn abs_value(&self) -> Self;
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }
}

/// `n!` in the scalar field.
pub fn factorial<S: Scalar>(n: usize) -> S {
    (1..=n).fold(S::one(), |acc, k| acc * S::from_int(k as i64))
}

/// Binomial coefficient in the scalar field.
pub fn binomial<S: Scalar>(n: usize, k: usize) -> S {
    if k > n {
        return S::zero();
    }
    let k = k.min(n - k);
    let mut acc = S::one();
    for i in 0..k {
        acc = acc * S::from_int((n - i) as i64) / S::from_int((i + 1) as i64);
    }
    acc
}

/// Parses `"p/q"` or `"p"` (and decimals for inexact scalars).
pub fn parse_scalar<S: Scalar>(text: &str) -> Option<S> {
    let t = text.trim();
    if let Ok(v) = S::from_str(t) {
        return Some(v);
    }
    // f64 does not parse "p/q"; fall back to a manual split.
    let (n, d) = t.split_once('/')?;
    let n: i64 = n.trim().parse().ok()?;
    let d: i64 = d.trim().parse().ok()?;
    if d == 0 {
        return None;
    }
    Some(S::ratio(n, d))
}

pub(crate) fn is_zero<S: Scalar>(s: &S) -> bool {
    Zero::is_zero(s)
}
