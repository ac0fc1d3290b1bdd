//! Closed-form quantities of the PARITY construction.
//!
//! With `Σ` ones among `n` bits and `ρ = α (1/Σ - 1/n)`:
//!
//! ```text
//! γ      = 10 Σ / (Σ + (α/n)(n - Σ))
//! Γ      = Σ_i i^γ i^10 / Σ_i i^γ
//! f(ρ)   = (11 + ρ) / (21 + 11 ρ)
//! τ_n    = n^10 (1 + 5/n - 5/(3 n^2))
//! C      = (100/441) α
//! A_n    = -11/21 - (100/441) α / n
//! L_i    = -2 Γ (C/i) - τ_n (C/i)^2 - 2 τ_n A_n (C/i)
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::{compensated_sum, Real};

/// `f(0) = 11/21`.
pub fn f0<S: Real>() -> S {
    S::ratio(11, 21)
}

/// `f'(0) = -100/441`.
pub fn fprime0<S: Real>() -> S {
    S::ratio(-100, 441)
}

/// `f''(0) = 2200/9261`.
pub fn fsecond0<S: Real>() -> S {
    S::ratio(2200, 9261)
}

pub fn f_rho<S: Real>(rho: &S) -> Result<S> {
    let den = S::from_i64(21) + S::from_i64(11) * rho.clone();
    if den.is_zero() {
        return Err(Error::Range("f(ρ) has a pole at ρ = -21/11".into()));
    }
    Ok((S::from_i64(11) + rho.clone()) / den)
}

/// `τ_i = i^8 (3 i^2 + 15 i - 5) / 3`, exact up to one rounding when
/// `i^10` is representable.
pub fn tau<S: Real>(i: usize) -> S {
    let fi = S::from_usize(i);
    let poly = i as i64;
    let poly = 3 * poly * poly + 15 * poly - 5;
    fi.powi(8) * S::from_i64(poly) / S::from_i64(3)
}

/// `C = -f'(0) α`.
pub fn c_const<S: Real>(alpha: &S) -> S {
    -fprime0::<S>() * alpha.clone()
}

/// `A_n = -f(0) + f'(0) α / n`; negative for every `n >= 1`.
pub fn a_n<S: Real>(alpha: &S, n: usize) -> S {
    -f0::<S>() + fprime0::<S>() * alpha.clone() / S::from_usize(n)
}

pub fn rho<S: Real>(sigma: usize, n: usize, alpha: &S) -> S {
    alpha.clone() * (S::one() / S::from_usize(sigma) - S::one() / S::from_usize(n))
}

#[derive(Clone, Debug, Serialize)]
pub struct DerivedConstants<S> {
    pub alpha: S,
    pub f0: S,
    pub fprime0: S,
    pub c: S,
}

impl<S: Real> DerivedConstants<S> {
    pub fn new(alpha: f64) -> Self {
        let a = S::from_f64(alpha);
        DerivedConstants {
            c: c_const(&a),
            alpha: a,
            f0: f0(),
            fprime0: fprime0(),
        }
    }

    pub fn a(&self, n: usize) -> S {
        a_n(&self.alpha, n)
    }

    pub fn tau(&self, n: usize) -> S {
        tau(n)
    }
}

pub fn gamma_exact<S: Real>(sigma: usize, n: usize, alpha: &S) -> Result<S> {
    if sigma == 0 || sigma > n {
        return Err(Error::Range(format!(
            "γ needs 1 <= Σ <= n, got Σ = {sigma}, n = {n}"
        )));
    }
    let s = S::from_usize(sigma);
    let rest = alpha.clone() / S::from_usize(n) * S::from_usize(n - sigma);
    Ok(S::from_i64(10) * s.clone() / (s + rest))
}

/// `ln(i/n)` and `i^10` for `i = 1..=n`, shared by every `Γ` evaluation at
/// one length.
#[derive(Clone, Debug)]
pub struct PowerTable<S> {
    ln_ratio: Vec<S>,
    pow10: Vec<S>,
}

impl<S: Real> PowerTable<S> {
    pub fn new(n: usize) -> Self {
        let ln_n = S::from_usize(n).ln();
        PowerTable {
            ln_ratio: (1..=n).map(|i| S::from_usize(i).ln() - ln_n.clone()).collect(),
            pow10: (1..=n).map(|i| S::from_usize(i).powi(10)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pow10.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pow10.is_empty()
    }

    /// `Γ` by direct summation with weights `(i/n)^γ = exp(γ ln(i/n))`, so
    /// the largest weight is 1 and nothing overflows.
    pub fn big_gamma(&self, gamma: &S) -> S {
        let w: Vec<S> = self.ln_ratio.iter().map(|l| (gamma.clone() * l.clone()).exp()).collect();
        let num = compensated_sum(w.iter().zip(&self.pow10).map(|(a, b)| a.clone() * b.clone()));
        num / compensated_sum(w)
    }
}

pub fn big_gamma_exact<S: Real>(gamma: &S, n: usize) -> S {
    PowerTable::new(n).big_gamma(gamma)
}

pub fn layer3_logit<S: Real>(i: usize, n: usize, big_gamma: &S, k: &DerivedConstants<S>) -> S {
    logit_terms(i, big_gamma, &k.c, &k.tau(n), &k.a(n))
}

fn logit_terms<S: Real>(i: usize, big_gamma: &S, c: &S, tau_n: &S, a_n: &S) -> S {
    let ci = c.clone() / S::from_usize(i);
    let two = S::from_i64(2);
    -(two.clone() * big_gamma.clone() * ci.clone())
        - tau_n.clone() * ci.clone() * ci.clone()
        - two * tau_n.clone() * a_n.clone() * ci
}

/// Closed-form layer-3 logits `L_1..L_n` for a weight-`Σ` input.
pub fn layer3_logits<S: Real>(sigma: usize, n: usize, k: &DerivedConstants<S>) -> Result<Vec<S>> {
    layer3_logits_with(sigma, n, k, &PowerTable::new(n))
}

pub fn layer3_logits_with<S: Real>(
    sigma: usize,
    n: usize,
    k: &DerivedConstants<S>,
    table: &PowerTable<S>,
) -> Result<Vec<S>> {
    let g = gamma_exact(sigma, n, &k.alpha)?;
    let big = table.big_gamma(&g);
    let (t, a) = (k.tau(n), k.a(n));
    Ok((1..=n).map(|i| logit_terms(i, &big, &k.c, &t, &a)).collect())
}

/// `min_{i != Σ} L_Σ - L_i`, without any range restriction on `Σ` beyond
/// `1 <= Σ <= n`, `n >= 2`.
pub fn gap_from_logits<S: Real>(logits: &[S], sigma: usize) -> S {
    let top = logits[sigma - 1].clone();
    logits
        .iter()
        .enumerate()
        .filter(|(i, _)| i + 1 != sigma)
        .map(|(_, l)| top.clone() - l.clone())
        .reduce(S::min_of)
        .expect("n >= 2")
}

/// `z` and its distance to `(-1)^Σ`, computed from the softmax weights as
/// `2 Σ_{i of the other parity} w_i` to avoid cancellation.
pub fn z_from_logits<S: Real>(logits: &[S], sigma: usize) -> Result<(S, S)> {
    let w = crate::engine::stable_softmax(logits)?;
    let sign = |i: usize| if i.is_multiple_of(2) { S::one() } else { -S::one() };
    let z = compensated_sum(w.iter().enumerate().map(|(k, wi)| wi.clone() * sign(k + 1)));
    let wrong = compensated_sum(
        w.iter()
            .enumerate()
            .filter(|(k, _)| (k + 1) % 2 != sigma % 2)
            .map(|(_, wi)| wi.clone()),
    );
    Ok((z, S::from_i64(2) * wrong))
}
