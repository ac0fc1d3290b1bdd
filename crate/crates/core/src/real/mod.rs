//! Scalar backends.
//!
//! Everything numeric in the crate is generic over [`Real`]. Three families of
//! implementations exist:
//!
//! * `f64`, the IEEE double-precision default;
//! * [`DoubleDouble`], an unevaluated sum of two doubles carrying roughly 106
//!   mantissa bits, fast enough for long sampled runs;
//! * [`BigReal`], a software float with a fixed number of mantissa bits backed
//!   by `astro-float-num`.
//!
//! [`PrecisionConfig`] selects one of them at runtime and [`PrecisionConfig::dispatch`]
//! monomorphizes a [`WithReal`] visitor for the chosen backend.

mod big;
mod dd;
mod precision;

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

pub use big::BigReal;
pub use dd::DoubleDouble;
pub use precision::{PrecisionConfig, WithReal};

/// A real scalar in some finite-precision representation.
///
/// Arithmetic follows the backend's rounding; overflow produces a non-finite
/// value that callers are expected to detect with [`Real::is_finite`].
pub trait Real:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Short backend name used in reports, e.g. `double` or `ext:106`.
    fn backend_name() -> String;

    /// Number of significand bits, including the implicit leading bit.
    fn mantissa_bits() -> u32;

    fn from_f64(x: f64) -> Self;

    /// Exact for every `i64` on the extended backends.
    fn from_i64(x: i64) -> Self;

    fn to_f64(&self) -> f64;

    fn exp(&self) -> Self;

    /// Natural logarithm. Non-positive arguments give a non-finite result.
    fn ln(&self) -> Self;

    fn sqrt(&self) -> Self;

    fn is_finite(&self) -> bool;

    /// Lossless text form, parsed back by [`Real::from_text`].
    fn to_text(&self) -> String;

    fn from_text(s: &str) -> Option<Self>;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// `p / q` computed in the backend.
    fn ratio(p: i64, q: i64) -> Self {
        Self::from_i64(p) / Self::from_i64(q)
    }

    fn from_usize(x: usize) -> Self {
        Self::from_i64(x as i64)
    }

    /// Integer power by repeated squaring; exact while the result is
    /// representable.
    fn powi(&self, mut k: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base.clone();
            }
            k >>= 1;
            if k > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    /// `self^e` for `self > 0`, as `exp(e * ln self)`.
    fn powf(&self, e: &Self) -> Self {
        (e.clone() * self.ln()).exp()
    }

    /// Unit in the last place of 1.
    fn epsilon() -> Self {
        let bits = Self::mantissa_bits() as i32 - 1;
        let mut x = Self::one();
        let half = Self::from_f64(0.5);
        for _ in 0..bits {
            x = x * half.clone();
        }
        x
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    /// JSON value used by the model file format. Doubles are plain numbers;
    /// other backends use their lossless text form.
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_text())
    }

    fn from_json(v: &serde_json::Value) -> Option<Self> {
        match v {
            serde_json::Value::Number(n) => n.as_f64().map(Self::from_f64),
            serde_json::Value::String(s) => Self::from_text(s),
            _ => None,
        }
    }
}

impl Real for f64 {
    fn backend_name() -> String {
        "double".into()
    }

    fn mantissa_bits() -> u32 {
        f64::MANTISSA_DIGITS
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn from_i64(x: i64) -> Self {
        x as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn exp(&self) -> Self {
        f64::exp(*self)
    }

    fn ln(&self) -> Self {
        f64::ln(*self)
    }

    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }

    fn to_text(&self) -> String {
        format!("{self:?}")
    }

    fn from_text(s: &str) -> Option<Self> {
        s.parse().ok()
    }

    fn is_zero(&self) -> bool {
        *self == 0.0
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn epsilon() -> Self {
        f64::EPSILON
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Number::from_f64(*self)
            .map(serde_json::Value::Number)
            .unwrap_or_else(|| serde_json::Value::String(self.to_text()))
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum<S: Real>(terms: impl IntoIterator<Item = S>) -> S {
    let mut sum = S::zero();
    let mut comp = S::zero();
    for x in terms {
        let t = sum.clone() + x.clone();
        if sum.abs() >= x.abs() {
            comp = comp + ((sum - t.clone()) + x);
        } else {
            comp = comp + ((x - t.clone()) + sum);
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generic_identities<S: Real>() {
        let two = S::from_i64(2);
        assert_eq!(two.powi(10), S::from_i64(1024));
        assert_eq!(S::ratio(3, 4), S::from_f64(0.75));
        let e = S::one().exp();
        let back = e.ln();
        let err = (back - S::one()).abs().to_f64();
        assert!(err < 4.0 * S::epsilon().to_f64(), "ln(exp(1)) err {err}");
        let r = S::from_i64(2).sqrt();
        let sq = r.clone() * r;
        assert!((sq - two).abs().to_f64() < 8.0 * S::epsilon().to_f64());
        assert!(!S::from_i64(-1).ln().is_finite() || S::from_i64(-1).ln().to_f64().is_nan());
    }

    #[test]
    fn identities_hold_on_every_backend() {
        generic_identities::<f64>();
        generic_identities::<DoubleDouble>();
        generic_identities::<BigReal<128>>();
    }

    #[test]
    fn epsilon_matches_mantissa_width() {
        assert_eq!(<f64 as Real>::epsilon(), f64::EPSILON);
        assert_eq!(DoubleDouble::epsilon().to_f64(), 2f64.powi(-105));
        assert_eq!(BigReal::<128>::epsilon().to_f64(), 2f64.powi(-127));
    }

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let s: f64 = compensated_sum([1e16, 1.0, -1e16]);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn text_round_trip() {
        let x = DoubleDouble::ratio(1, 3);
        assert_eq!(DoubleDouble::from_text(&x.to_text()), Some(x));
        let y = BigReal::<256>::ratio(2, 7);
        assert_eq!(BigReal::<256>::from_text(&y.to_text()), Some(y));
        let z = 0.1f64;
        assert_eq!(f64::from_json(&z.to_json()), Some(z));
    }
}
