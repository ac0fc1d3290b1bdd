//! Double-double arithmetic: a value is the unevaluated sum `hi + lo` with
//! `|lo| <= ulp(hi) / 2`, giving about 106 significand bits.
//!
//! The kernels are the classic error-free transformations (two-sum and
//! fma-based two-product) followed by renormalization. Relative precision
//! degrades once the low word goes subnormal, i.e. for magnitudes below about
//! 1e-290.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Real;

#[derive(Clone, Copy, Debug, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

const LN2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `x * 2^k` without intermediate overflow of the scale factor.
fn ldexp(x: f64, k: i32) -> f64 {
    let half = k / 2;
    x * 2f64.powi(half) * 2f64.powi(k - half)
}

impl DoubleDouble {
    pub const fn new(hi: f64, lo: f64) -> Self {
        DoubleDouble { hi, lo }
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let (s, e) = quick_two_sum(hi, lo);
        DoubleDouble { hi: s, lo: e }
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        Self::renorm(p, e + self.lo * b)
    }

    fn scale2(self, k: i32) -> Self {
        DoubleDouble {
            hi: ldexp(self.hi, k),
            lo: ldexp(self.lo, k),
        }
    }

    fn nan() -> Self {
        DoubleDouble {
            hi: f64::NAN,
            lo: f64::NAN,
        }
    }

    fn exp_impl(self) -> Self {
        if self.hi.is_nan() {
            return Self::nan();
        }
        if self.hi > 709.78 {
            return DoubleDouble::from(f64::INFINITY);
        }
        if self.hi < -745.2 {
            return DoubleDouble::from(0.0);
        }
        if self.hi == 0.0 {
            return DoubleDouble::from(1.0);
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2.mul_f64(k);
        // exp(r) = (1 + s)^(2^10) with s = expm1(r / 2^10)
        let r = r.scale2(-10);
        let mut term = r;
        let mut s = r;
        for i in 2..=14 {
            term = term * r;
            term = term / DoubleDouble::from(i as f64);
            s = s + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..10 {
            // (1 + s)^2 - 1 = s * (2 + s)
            s = s * (s + DoubleDouble::from(2.0));
        }
        (s + DoubleDouble::from(1.0)).scale2(k as i32)
    }

    fn ln_impl(self) -> Self {
        if self.hi.is_nan() || self.hi < 0.0 {
            return Self::nan();
        }
        if self.hi == 0.0 {
            return DoubleDouble::from(f64::NEG_INFINITY);
        }
        if self.hi.is_infinite() {
            return self;
        }
        // One Newton step on exp(y) = x from the double estimate.
        let y = DoubleDouble::from(self.hi.ln());
        y + self * (-y).exp_impl() - DoubleDouble::from(1.0)
    }

    fn sqrt_impl(self) -> Self {
        if self.hi == 0.0 {
            return DoubleDouble::from(0.0);
        }
        if self.hi < 0.0 {
            return Self::nan();
        }
        let a = self.hi.sqrt();
        let y = DoubleDouble::from(a);
        y + (self - y * y).mul_f64(0.5 / a)
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }
}

impl PartialEq for DoubleDouble {
    fn eq(&self, other: &Self) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            ord => Some(ord),
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;

    fn add(self, y: Self) -> Self {
        let (s, e) = two_sum(self.hi, y.hi);
        if !s.is_finite() {
            return DoubleDouble { hi: s, lo: 0.0 };
        }
        let (t, f) = two_sum(self.lo, y.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::renorm(s, e + f)
    }
}

impl Sub for DoubleDouble {
    type Output = Self;

    fn sub(self, y: Self) -> Self {
        self + (-y)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;

    fn neg(self) -> Self {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for DoubleDouble {
    type Output = Self;

    fn mul(self, y: Self) -> Self {
        let (p, e) = two_prod(self.hi, y.hi);
        if !p.is_finite() {
            return DoubleDouble { hi: p, lo: 0.0 };
        }
        Self::renorm(p, e + (self.hi * y.lo + self.lo * y.hi))
    }
}

impl Div for DoubleDouble {
    type Output = Self;

    fn div(self, y: Self) -> Self {
        let q1 = self.hi / y.hi;
        if !q1.is_finite() {
            return DoubleDouble { hi: q1, lo: 0.0 };
        }
        let r = self - y.mul_f64(q1);
        let q2 = r.hi / y.hi;
        let r = r - y.mul_f64(q2);
        let q3 = r.hi / y.hi;
        let (h, l) = quick_two_sum(q1, q2);
        DoubleDouble { hi: h, lo: l } + DoubleDouble::from(q3)
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == 0.0 {
            write!(f, "{}", self.hi)
        } else {
            write!(f, "{}{:+e}", self.hi, self.lo)
        }
    }
}

impl Real for DoubleDouble {
    fn backend_name() -> String {
        "ext:106".into()
    }

    fn mantissa_bits() -> u32 {
        106
    }

    fn from_f64(x: f64) -> Self {
        DoubleDouble::from(x)
    }

    fn from_i64(x: i64) -> Self {
        let hi = x as f64;
        // `hi` rounds to nearest, so the remainder fits in 53 bits.
        let lo = (x as i128 - hi as i128) as f64;
        DoubleDouble::renorm(hi, lo)
    }

    fn to_f64(&self) -> f64 {
        self.hi + self.lo
    }

    fn exp(&self) -> Self {
        self.exp_impl()
    }

    fn ln(&self) -> Self {
        self.ln_impl()
    }

    fn sqrt(&self) -> Self {
        self.sqrt_impl()
    }

    fn is_finite(&self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    fn to_text(&self) -> String {
        format!("{:?};{:?}", self.hi, self.lo)
    }

    fn from_text(s: &str) -> Option<Self> {
        match s.split_once(';') {
            Some((h, l)) => Some(DoubleDouble {
                hi: h.trim().parse().ok()?,
                lo: l.trim().parse().ok()?,
            }),
            None => s.trim().parse::<f64>().ok().map(DoubleDouble::from),
        }
    }

    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }

    fn abs(&self) -> Self {
        if self.hi < 0.0 {
            -*self
        } else {
            *self
        }
    }

    fn epsilon() -> Self {
        DoubleDouble::from(2f64.powi(-105))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dd(x: f64) -> DoubleDouble {
        DoubleDouble::from(x)
    }

    #[test]
    fn one_third_times_three_is_one_to_106_bits() {
        let third = dd(1.0) / dd(3.0);
        let back = third * dd(3.0);
        assert!((back - dd(1.0)).abs().to_f64() < 1e-31);
        assert!(third.lo != 0.0);
    }

    #[test]
    fn exp_ln_round_trip() {
        for &x in &[-600.0, -20.5, -1.0, 1e-5, 0.3, 1.0, 10.0, 300.0] {
            let y = dd(x).exp().ln();
            let err = (y - dd(x)).abs().to_f64() / x.abs().max(1.0);
            assert!(err < 1e-29, "x = {x}: {err}");
        }
    }

    #[test]
    fn exp_of_ln2_multiple_is_power_of_two() {
        let v = (LN2 * dd(37.0)).exp();
        let err = (v / dd(2f64.powi(37)) - dd(1.0)).abs().to_f64();
        assert!(err < 1e-30, "{err}");
    }

    #[test]
    fn exp_one_matches_known_expansion() {
        // e = 2.718281828459045 + 1.4456468917292502e-16
        let e = dd(1.0).exp();
        assert_eq!(e.hi, std::f64::consts::E);
        assert!((e.lo - 1.445_646_891_729_250_2e-16).abs() < 1e-31);
    }

    #[test]
    fn from_i64_is_exact_above_2_pow_53() {
        let x = (1i64 << 60) + 12345;
        let d = DoubleDouble::from_i64(x);
        assert_eq!(d.hi as i128 + d.lo as i128, x as i128);
    }

    #[test]
    fn overflow_is_not_finite() {
        assert!(!dd(800.0).exp().is_finite());
        assert!(!(dd(1e300) * dd(1e300)).is_finite());
        assert_eq!(dd(-800.0).exp(), dd(0.0));
    }
}
