//! Softmax transformers with exact weights, in `f64` or extended precision.
//!
//! [`engine`] evaluates arbitrary models, [`parity`] builds the PARITY and
//! majority models and calibrates their constants.

pub mod asymptotics;
pub mod bits;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod parity;
pub mod real;
pub mod report;
pub mod sensitivity;

pub use error::{Error, Result};

/// Guide chapters, compiled so their snippets run as doc-tests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/engine.md")]
    pub struct Engine;
    #[doc = include_str!("../../../book/src/precision.md")]
    pub struct Precision;
    #[doc = include_str!("../../../book/src/parity.md")]
    pub struct Parity;
    #[doc = include_str!("../../../book/src/calibration.md")]
    pub struct Calibration;
    #[doc = include_str!("../../../book/src/asymptotics.md")]
    pub struct Asymptotics;
    #[doc = include_str!("../../../book/src/sensitivity.md")]
    pub struct Sensitivity;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
