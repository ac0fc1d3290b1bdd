//! The PARITY construction: closed forms, split strings, coordinate layout,
//! weight builders and the calibration search for the free constants.

mod build;
pub mod calibrate;
pub mod formulas;
mod layout;
mod split;

use serde::{Deserialize, Serialize};

use crate::bits;
use crate::error::{Error, Result};
use crate::real::{PrecisionConfig, Real};

pub use build::{
    build_full_model, build_full_model_with_dim, build_majority_model, build_restricted_model,
    even_sign_patterns, majority_layout,
};
pub use calibrate::{calibrate, CalibrationGrid, CalibrationReport};
pub use formulas::DerivedConstants;
pub use layout::CoordinateLayout;
pub use split::{max_split_weight, split_strings};

/// Constants of the construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionParams {
    pub alpha: f64,
    pub c: f64,
    /// Number of split strings; even and greater than `2/c`.
    pub m: usize,
    /// Smallest certified input length.
    pub n_min: usize,
    pub precision: PrecisionConfig,
}

impl ConstructionParams {
    pub fn new(alpha: f64, c: f64, m: usize, n_min: usize, precision: PrecisionConfig) -> Result<Self> {
        let p = ConstructionParams {
            alpha,
            c,
            m,
            n_min,
            precision,
        };
        p.validate()?;
        Ok(p)
    }

    /// Output of [`calibrate`] on [`CalibrationGrid::default`], frozen. A
    /// test re-runs the search and compares.
    pub fn calibrated() -> Self {
        ConstructionParams {
            alpha: 0.6,
            c: 0.34,
            m: 6,
            n_min: 8,
            precision: PrecisionConfig::Double,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("α = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::InvalidInput(format!("c = {} must lie in (0, 1)", self.c)));
        }
        if self.m == 0 || self.m % 2 == 1 {
            return Err(Error::InvalidInput(format!("M = {} must be even and positive", self.m)));
        }
        if (self.m as f64) * self.c <= 2.0 {
            return Err(Error::InvalidInput(format!(
                "M = {} must exceed 2/c = {:.4}",
                self.m,
                2.0 / self.c
            )));
        }
        if self.n_min == 0 {
            return Err(Error::InvalidInput("n_min must be positive".into()));
        }
        self.precision.validate()
    }

    /// Smallest even integer strictly greater than `2/c`.
    pub fn smallest_m(c: f64) -> usize {
        let mut m = 2;
        while (m as f64) * c <= 2.0 {
            m += 2;
        }
        m
    }

    /// `floor(c n)`, the largest weight the restricted model covers.
    pub fn restricted_sigma_max(&self, n: usize) -> usize {
        (self.c * n as f64).floor() as usize
    }
}

/// `min_{i != Σ} L_Σ - L_i` for `1 <= Σ <= floor(c n)`.
pub fn attention_gap<S: Real>(n: usize, sigma: usize, params: &ConstructionParams) -> Result<S> {
    if n < 2 || sigma == 0 || sigma > params.restricted_sigma_max(n) {
        return Err(Error::Range(format!(
            "gap needs n >= 2 and 1 <= Σ <= floor(c n) = {}, got n = {n}, Σ = {sigma}",
            params.restricted_sigma_max(n)
        )));
    }
    let k = DerivedConstants::<S>::new(params.alpha);
    let logits = formulas::layer3_logits(sigma, n, &k)?;
    Ok(formulas::gap_from_logits(&logits, sigma))
}

/// `z = Σ_i softmax(L)_i (-1)^i` for the weight of `x`, restricted range.
pub fn z_value<S: Real>(x: &[bool], params: &ConstructionParams) -> Result<S> {
    let n = x.len();
    let sigma = bits::weight(x);
    if sigma == 0 || sigma > params.restricted_sigma_max(n) {
        return Err(Error::Range(format!(
            "z needs 1 <= Σ <= floor(c n) = {}, got Σ = {sigma}",
            params.restricted_sigma_max(n)
        )));
    }
    let k = DerivedConstants::<S>::new(params.alpha);
    let logits = formulas::layer3_logits(sigma, n, &k)?;
    Ok(formulas::z_from_logits(&logits, sigma)?.0)
}
