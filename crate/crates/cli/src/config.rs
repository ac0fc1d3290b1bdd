use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use parity_transformer::asymptotics::Order;
use parity_transformer::real::PrecisionConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Table,
}

/// Every setting a run can take. The same struct is read from the command
/// line and from a JSON config file; command-line values win.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    /// Weight on zero bits in the first attention layer.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Fraction of ones the restricted model covers.
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// Number of split strings.
    #[arg(long = "M", global = true)]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub n_min: Option<usize>,
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    /// Random inputs per length, or random hyperplanes per length.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Random models per (scale, length) in the sensitivity sweep.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `double` or `ext:<bits>`.
    #[arg(long, global = true)]
    pub precision: Option<PrecisionConfig>,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON file with any of these settings.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Power-sum exponents for the Faulhaber check.
    #[arg(long, global = true, value_delimiter = ',')]
    pub exponents: Option<Vec<f64>>,
    /// Faulhaber expansion order (0, 1 or 2).
    #[arg(long, global = true)]
    pub order: Option<Order>,
    /// Explicit lengths for sampled checks.
    #[arg(long, global = true, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
    /// Calibration report to take constants from.
    #[arg(long, global = true)]
    pub calibration: Option<PathBuf>,
    /// Calibration grid over `α` (config file only).
    #[arg(skip)]
    pub alphas: Option<Vec<f64>>,
    /// Calibration grid over `c` (config file only).
    #[arg(skip)]
    pub cs: Option<Vec<f64>>,
}

impl Flags {
    /// Fills unset values from `--config`, if given.
    pub fn with_config_file(self) -> anyhow::Result<Flags> {
        match &self.config {
            Some(path) => {
                let file = Flags::read(path)?;
                Ok(self.or(file))
            }
            None => Ok(self),
        }
    }

    pub fn read(path: &Path) -> anyhow::Result<Flags> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn or(self, o: Flags) -> Flags {
        Flags {
            alpha: self.alpha.or(o.alpha),
            c: self.c.or(o.c),
            m: self.m.or(o.m),
            n_min: self.n_min.or(o.n_min),
            n_max: self.n_max.or(o.n_max),
            samples: self.samples.or(o.samples),
            trials: self.trials.or(o.trials),
            seed: self.seed.or(o.seed),
            precision: self.precision.or(o.precision),
            out: self.out.or(o.out),
            format: self.format.or(o.format),
            config: self.config,
            exponents: self.exponents.or(o.exponents),
            order: self.order.or(o.order),
            lengths: self.lengths.or(o.lengths),
            calibration: self.calibration.or(o.calibration),
            alphas: self.alphas.or(o.alphas),
            cs: self.cs.or(o.cs),
        }
    }

    pub(crate) fn require_seed(&self, command: &str) -> anyhow::Result<u64> {
        self.seed
            .with_context(|| format!("{command} draws random samples; pass --seed"))
    }
}
