//! Fixed-width software floats.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float_num::{BigFloat, Consts, Radix, RoundingMode, Sign};

use super::Real;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constant cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// A binary float with `BITS` significand bits, rounded to nearest-even after
/// every operation.
#[derive(Clone, Debug)]
pub struct BigReal<const BITS: usize>(BigFloat);

impl<const BITS: usize> BigReal<BITS> {
    pub fn inner(&self) -> &BigFloat {
        &self.0
    }

    fn wrap(x: BigFloat) -> Self {
        BigReal(x)
    }
}

impl<const BITS: usize> PartialEq for BigReal<BITS> {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl<const BITS: usize> PartialOrd for BigReal<BITS> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl<const BITS: usize> Add for BigReal<BITS> {
    type Output = Self;
    fn add(self, y: Self) -> Self {
        Self::wrap(self.0.add(&y.0, BITS, RM))
    }
}

impl<const BITS: usize> Sub for BigReal<BITS> {
    type Output = Self;
    fn sub(self, y: Self) -> Self {
        Self::wrap(self.0.sub(&y.0, BITS, RM))
    }
}

impl<const BITS: usize> Mul for BigReal<BITS> {
    type Output = Self;
    fn mul(self, y: Self) -> Self {
        Self::wrap(self.0.mul(&y.0, BITS, RM))
    }
}

impl<const BITS: usize> Div for BigReal<BITS> {
    type Output = Self;
    fn div(self, y: Self) -> Self {
        Self::wrap(self.0.div(&y.0, BITS, RM))
    }
}

impl<const BITS: usize> Neg for BigReal<BITS> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::wrap(self.0.neg())
    }
}

impl<const BITS: usize> fmt::Display for BigReal<BITS> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = with_consts(|cc| self.0.format(Radix::Dec, RM, cc));
        match s {
            Ok(s) => f.write_str(&s),
            Err(_) => write!(f, "{}", self.to_f64()),
        }
    }
}

impl<const BITS: usize> Real for BigReal<BITS> {
    fn backend_name() -> String {
        format!("ext:{BITS}")
    }

    fn mantissa_bits() -> u32 {
        BITS as u32
    }

    fn from_f64(x: f64) -> Self {
        Self::wrap(BigFloat::from_f64(x, BITS))
    }

    fn from_i64(x: i64) -> Self {
        Self::wrap(BigFloat::from_i64(x, BITS))
    }

    fn to_f64(&self) -> f64 {
        if self.0.is_nan() {
            return f64::NAN;
        }
        if self.0.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.0.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        let Some((words, _, sign, exp, _)) = self.0.as_raw_parts() else {
            return f64::NAN;
        };
        // value = 0.m * 2^exp with the most significant word last
        let n = words.len();
        let top = words.get(n.wrapping_sub(1)).copied().unwrap_or(0) as u128;
        let next = if n >= 2 { words[n - 2] as u128 } else { 0 };
        let sticky = words[..n.saturating_sub(2)].iter().any(|&w| w != 0);
        let mut m = (top << 64) | next;
        if sticky {
            m |= 1;
        }
        if m == 0 {
            return 0.0;
        }
        let mag = (m as f64) * 2f64.powi(-64) * 2f64.powi(-64);
        let e = exp;
        let half = e / 2;
        let v = mag * 2f64.powi(half) * 2f64.powi(e - half);
        match sign {
            Sign::Neg => -v,
            Sign::Pos => v,
        }
    }

    fn exp(&self) -> Self {
        Self::wrap(with_consts(|cc| self.0.exp(BITS, RM, cc)))
    }

    fn ln(&self) -> Self {
        if self.0.is_negative() && !self.0.is_zero() {
            return Self::wrap(BigFloat::nan(None));
        }
        Self::wrap(with_consts(|cc| self.0.ln(BITS, RM, cc)))
    }

    fn sqrt(&self) -> Self {
        Self::wrap(self.0.sqrt(BITS, RM))
    }

    fn is_finite(&self) -> bool {
        !self.0.is_nan() && !self.0.is_inf()
    }

    fn to_text(&self) -> String {
        with_consts(|cc| self.0.format(Radix::Hex, RM, cc)).unwrap_or_else(|_| "NaN".into())
    }

    fn from_text(s: &str) -> Option<Self> {
        let v = with_consts(|cc| BigFloat::parse(s.trim(), Radix::Hex, BITS, RM, cc));
        if v.is_nan() && !s.trim().eq_ignore_ascii_case("nan") {
            None
        } else {
            Some(Self::wrap(v))
        }
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}
