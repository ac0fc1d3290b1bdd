//! `sensitivity`: average sensitivity of PARITY, majority and random models,
//! plus hyperplane edge cuts.

use parity_transformer::engine::Masking;
use parity_transformer::parity::build_majority_model;
use parity_transformer::report::Table;
use parity_transformer::sensitivity::{
    average_sensitivity, cut_edges, cut_sampling, majority_average_sensitivity, ratio_to_f64, sensitive_edge_count,
    sensitivity_sweep, truth_table, BooleanFunction, CutRow, Hyperplane, SweepConfig, SweepReport,
};
use serde::{Deserialize, Serialize};

use crate::config::Flags;
use crate::output::Outcome;

pub const COMMAND: &str = "sensitivity";
/// `as(maj_n)/sqrt(n)` must land in this interval.
pub const MAJORITY_BAND: (f64, f64) = (0.6, 1.0);
/// Largest cut over `sqrt(n) 2^n` must stay below this. The majority cut is
/// the largest and tends to `1/sqrt(2π) ≈ 0.40`; at `n = 9` it is 0.41.
pub const CUT_CEILING: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityConfig {
    /// PARITY and the built majority model are checked for `n <= n_max`.
    pub n_max: usize,
    pub majority_ns: Vec<usize>,
    pub sweep: SweepConfig,
    pub cut_ns: Vec<usize>,
    pub cut_samples: usize,
    pub seed: u64,
}

impl SensitivityConfig {
    pub fn from_flags(f: &Flags) -> anyhow::Result<Self> {
        let seed = f.require_seed(COMMAND)?;
        let n_max = f.n_max.unwrap_or(12);
        anyhow::ensure!((1..=16).contains(&n_max), "--n-max must lie in 1..=16 here, got {n_max}");
        let sweep = SweepConfig {
            trials: f.trials.unwrap_or(SweepConfig::default().trials),
            seed,
            ..SweepConfig::default()
        };
        Ok(SensitivityConfig {
            n_max,
            majority_ns: (3..=15).step_by(2).collect(),
            sweep,
            cut_ns: f.lengths.clone().unwrap_or_else(|| (8..=16).collect()),
            cut_samples: f.samples.unwrap_or(1000),
            seed,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityRow {
    pub n: usize,
    pub average_sensitivity: String,
    pub sensitive_edges: u64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorityRow {
    pub n: usize,
    pub average_sensitivity: String,
    pub over_sqrt_n: f64,
    /// The one-layer model's truth table equals majority (checked up to `n_max`).
    pub model_matches: Option<bool>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutCheck {
    pub n: usize,
    pub axis_cut: u64,
    pub axis_ok: bool,
    pub sampled: CutRow,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub parity: Vec<ParityRow>,
    pub majority: Vec<MajorityRow>,
    pub majority_model_small: Vec<(usize, bool)>,
    pub sweep: SweepReport,
    pub cuts: Vec<CutCheck>,
    pub cut_ceiling: f64,
    pub max_cut_ratio: f64,
}

impl SensitivityReport {
    pub fn pass(&self) -> bool {
        self.parity.iter().all(|r| r.pass)
            && self.majority.iter().all(|r| r.pass)
            && self.majority_model_small.iter().all(|r| r.1)
            && self.cuts.iter().all(|c| c.pass)
    }
}

fn majority_model_matches(n: usize) -> anyhow::Result<bool> {
    let model = build_majority_model::<f64>();
    let f = truth_table(&model, n, Masking::Full)?;
    Ok(f == BooleanFunction::majority(n)?)
}

pub fn sensitivity(cfg: &SensitivityConfig) -> anyhow::Result<SensitivityReport> {
    let parity = (1..=cfg.n_max)
        .map(|n| {
            let f = BooleanFunction::parity(n)?;
            let a = average_sensitivity(&f);
            Ok(ParityRow {
                n,
                average_sensitivity: a.to_string(),
                sensitive_edges: sensitive_edge_count(&f),
                pass: a == (n as u64).into(),
            })
        })
        .collect::<anyhow::Result<_>>()?;
    let majority = cfg
        .majority_ns
        .iter()
        .map(|&n| {
            let exact = majority_average_sensitivity(n)?;
            let table = average_sensitivity(&BooleanFunction::majority(n)?);
            let over = ratio_to_f64(&exact) / (n as f64).sqrt();
            let model_matches = if n <= cfg.n_max { Some(majority_model_matches(n)?) } else { None };
            let in_band = (MAJORITY_BAND.0..=MAJORITY_BAND.1).contains(&over);
            Ok(MajorityRow {
                n,
                average_sensitivity: exact.to_string(),
                over_sqrt_n: over,
                model_matches,
                pass: exact == table && in_band && model_matches != Some(false),
            })
        })
        .collect::<anyhow::Result<_>>()?;
    let majority_model_small = (1..=cfg.n_max)
        .filter(|n| n % 2 == 0 || *n == 1)
        .map(|n| Ok((n, majority_model_matches(n)?)))
        .collect::<anyhow::Result<_>>()?;
    let sweep = sensitivity_sweep(&cfg.sweep)?;
    let sampled = cut_sampling(&cfg.cut_ns, cfg.cut_samples, cfg.seed)?;
    let cuts: Vec<CutCheck> = sampled
        .into_iter()
        .map(|row| {
            let n = row.n;
            let axis_cut = cut_edges(&Hyperplane::axis(n, 0, 0.5)?, n)?;
            let axis_ok = axis_cut == 1u64 << (n - 1);
            Ok(CutCheck {
                n,
                axis_cut,
                axis_ok,
                pass: axis_ok && row.ratio <= CUT_CEILING,
                sampled: row,
            })
        })
        .collect::<anyhow::Result<_>>()?;
    let max_cut_ratio = cuts.iter().map(|c| c.sampled.ratio).fold(0.0, f64::max);
    Ok(SensitivityReport {
        parity,
        majority,
        majority_model_small,
        sweep,
        cuts,
        cut_ceiling: CUT_CEILING,
        max_cut_ratio,
    })
}

pub fn run(flags: &Flags) -> anyhow::Result<Outcome> {
    let cfg = SensitivityConfig::from_flags(flags)?;
    let r = sensitivity(&cfg)?;
    let pass = r.pass();
    let ok = |b: bool| if b { "pass" } else { "FAIL" }.to_string();

    let mut t = Table::new(["n", "as(parity)", "sensitive edges", "result"]);
    for p in &r.parity {
        t.push([p.n.to_string(), p.average_sensitivity.clone(), p.sensitive_edges.to_string(), ok(p.pass)]);
    }
    let mut text = t.to_string();

    let mut t = Table::new(["n", "as(maj)", "as/sqrt(n)", "model", "result"]);
    for m in &r.majority {
        let model = match m.model_matches {
            Some(b) => ok(b),
            None => "-".into(),
        };
        t.push([m.n.to_string(), m.average_sensitivity.clone(), format!("{:.6}", m.over_sqrt_n), model, ok(m.pass)]);
    }
    text.push('\n');
    text.push_str(&t.to_string());

    let mut t = Table::new(["scale", "n", "evaluated", "skipped", "max as/sqrt(n)", "mean as/sqrt(n)"]);
    for s in &r.sweep.rows {
        t.push([
            s.scale.to_string(),
            s.n.to_string(),
            s.evaluated.to_string(),
            s.skipped.to_string(),
            format!("{:.4}", s.max_ratio),
            format!("{:.4}", s.mean_ratio),
        ]);
    }
    text.push_str(&format!(
        "\nrandom one-layer models ({} trials, seed {}): max as/sqrt(n) = {:.4}, {} flagged above {}\n",
        cfg.sweep.trials,
        cfg.seed,
        r.sweep.max_ratio,
        r.sweep.flagged.len(),
        cfg.sweep.flag_above
    ));
    text.push_str(&t.to_string());

    let mut t = Table::new(["n", "axis cut", "max sampled cut", "cut/(sqrt(n) 2^n)", "result"]);
    for c in &r.cuts {
        t.push([
            c.n.to_string(),
            c.axis_cut.to_string(),
            c.sampled.max_cut.to_string(),
            format!("{:.4}", c.sampled.ratio),
            ok(c.pass),
        ]);
    }
    text.push_str(&format!(
        "\nedge cuts ({} hyperplanes per n, ceiling {}): max ratio {:.4}\n",
        cfg.cut_samples, CUT_CEILING, r.max_cut_ratio
    ));
    text.push_str(&t.to_string());

    let summary = format!(
        "sweep max as/sqrt(n) {:.4} with seed {}, max cut ratio {:.4}",
        r.sweep.max_ratio, cfg.seed, r.max_cut_ratio
    );
    Ok(Outcome::new(COMMAND, &cfg, Some(cfg.seed), "double".into(), pass, &r, text, summary))
}
