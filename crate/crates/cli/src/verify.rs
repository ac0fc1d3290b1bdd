//! `verify-parity`: exhaustive and sampled checks of the four-layer model.

use anyhow::Context;
use parity_transformer::bits;
use parity_transformer::engine::Evaluator;
use parity_transformer::parity::calibrate::{gap_scan, GapRow};
use parity_transformer::parity::{build_full_model, ConstructionParams};
use parity_transformer::real::{PrecisionConfig, Real, WithReal};
use parity_transformer::report::Table;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Flags;
use crate::output::Outcome;

pub const COMMAND: &str = "verify-parity";
/// Exhaustive checks stop at this length.
pub const EXHAUSTIVE_CAP: usize = 14;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_N_MAX: usize = 512;
/// Counterexamples kept per length; the mismatch count is always complete.
pub const KEEP: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub params: ConstructionParams,
    /// Where the constants came from before any overrides.
    pub source: String,
    pub exhaustive: Vec<usize>,
    pub sampled: Vec<usize>,
    pub samples: usize,
    pub seed: Option<u64>,
}

impl VerifyConfig {
    pub fn from_flags(f: &Flags) -> anyhow::Result<Self> {
        let (mut p, source) = match &f.calibration {
            Some(path) => (read_calibration(path)?, path.display().to_string()),
            None => (ConstructionParams::calibrated(), "built-in calibration".to_string()),
        };
        if let Some(a) = f.alpha {
            p.alpha = a;
        }
        if let Some(c) = f.c {
            p.c = c;
            if f.m.is_none() {
                p.m = ConstructionParams::smallest_m(c);
            }
        }
        if let Some(m) = f.m {
            p.m = m;
        }
        if let Some(n) = f.n_min {
            p.n_min = n;
        }
        p.precision = f.precision.unwrap_or(PrecisionConfig::Extended { mantissa_bits: 106 });
        p.validate()?;
        let hi = (p.n_min + 4).min(EXHAUSTIVE_CAP);
        let exhaustive: Vec<usize> = (p.n_min..=hi).collect();
        let n_max = f.n_max.unwrap_or(DEFAULT_N_MAX);
        let sampled = match &f.lengths {
            Some(l) => l.clone(),
            None => std::iter::successors(Some(64usize), |n| n.checked_mul(2))
                .take_while(|&n| n <= n_max)
                .collect(),
        };
        let samples = f.samples.unwrap_or(DEFAULT_SAMPLES);
        let seed = if samples > 0 && !sampled.is_empty() {
            Some(f.require_seed(COMMAND)?)
        } else {
            f.seed
        };
        Ok(VerifyConfig {
            params: p,
            source,
            exhaustive,
            sampled,
            samples,
            seed,
        })
    }
}

/// Constants chosen by a `calibrate` report.
fn read_calibration(path: &std::path::Path) -> anyhow::Result<ConstructionParams> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let chosen = v
        .pointer("/report/chosen")
        .filter(|c| !c.is_null())
        .with_context(|| format!("{} holds no chosen constants", path.display()))?;
    Ok(serde_json::from_value(chosen.clone())?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub input: String,
    pub expected: String,
    pub got: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthCheck {
    pub n: usize,
    pub mode: Mode,
    pub checked: u64,
    pub mismatches: u64,
    pub counterexamples: Vec<Counterexample>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// Gap and z deviations over `n_min..=n_top` for the chosen constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub n_min: usize,
    pub n_top: usize,
    pub min_gap_over_n6: f64,
    pub argmin_n: usize,
    pub max_z_dev_restricted: f64,
    pub max_z_dev_full: f64,
    /// The full model needs every split-string z within this of ±1.
    pub z_dev_full_limit: f64,
    pub ok: bool,
}

impl Margins {
    fn from_rows(p: &ConstructionParams, rows: &[GapRow], n_top: usize) -> Option<Margins> {
        let inside: Vec<&GapRow> = rows.iter().filter(|r| r.n >= p.n_min && r.n <= n_top).collect();
        let first = inside.first()?;
        let mut m = Margins {
            n_min: p.n_min,
            n_top,
            min_gap_over_n6: first.min_gap_over_n6,
            argmin_n: first.n,
            max_z_dev_restricted: 0.0,
            max_z_dev_full: 0.0,
            z_dev_full_limit: 0.05 / p.m as f64,
            ok: false,
        };
        for r in inside {
            if r.min_gap_over_n6 < m.min_gap_over_n6 {
                m.min_gap_over_n6 = r.min_gap_over_n6;
                m.argmin_n = r.n;
            }
            m.max_z_dev_restricted = m.max_z_dev_restricted.max(r.max_z_dev_restricted);
            m.max_z_dev_full = m.max_z_dev_full.max(r.max_z_dev_full);
        }
        m.ok = m.min_gap_over_n6 > 0.0 && m.max_z_dev_restricted <= 0.1 && m.max_z_dev_full < m.z_dev_full_limit;
        Some(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub params: ConstructionParams,
    pub margins: Option<Margins>,
    pub lengths: Vec<LengthCheck>,
    pub total_checked: u64,
    pub total_mismatches: u64,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.total_mismatches == 0 && self.margins.as_ref().is_some_and(|m| m.ok)
    }

    pub fn first_counterexample(&self) -> Option<&Counterexample> {
        self.lengths.iter().flat_map(|l| &l.counterexamples).next()
    }
}

struct CheckJob<'a> {
    cfg: &'a VerifyConfig,
}

impl WithReal for CheckJob<'_> {
    type Output = parity_transformer::Result<Vec<LengthCheck>>;

    fn run<S: Real>(self) -> Self::Output {
        let cfg = self.cfg;
        let p = &cfg.params;
        let model = build_full_model::<S>(p)?;
        let n_top = cfg.exhaustive.iter().chain(&cfg.sampled).copied().max().unwrap_or(1);
        let ev = Evaluator::new(&model)?.with_position_cache(n_top)?;
        let voc = &model.vocabulary;
        let check = |x: &[bool]| -> parity_transformer::Result<Option<Counterexample>> {
            let got = ev.forward_bits(x)?;
            let want = voc.bit(bits::parity(x));
            Ok((got != want).then(|| Counterexample {
                input: bits::format(x),
                expected: voc.symbol(want).to_string(),
                got: voc.symbol(got).to_string(),
            }))
        };
        let mut out = Vec::new();
        for &n in &cfg.exhaustive {
            let found = (0..1u64 << n)
                .into_par_iter()
                .map(|k| check(&bits::from_index(n, k)))
                .filter_map(|r| r.transpose())
                .collect::<parity_transformer::Result<Vec<_>>>()?;
            out.push(summarize(n, Mode::Exhaustive, 1 << n, found, None));
        }
        for &n in &cfg.sampled {
            if n < p.n_min {
                let note = format!("out of certified range (n_min = {})", p.n_min);
                out.push(summarize(n, Mode::Sampled, 0, Vec::new(), Some(note)));
                continue;
            }
            let inputs = sample_inputs(cfg.seed.unwrap_or(0), n, cfg.samples);
            let found = inputs
                .par_iter()
                .map(|x| check(x))
                .filter_map(|r| r.transpose())
                .collect::<parity_transformer::Result<Vec<_>>>()?;
            out.push(summarize(n, Mode::Sampled, cfg.samples as u64, found, None));
        }
        Ok(out)
    }
}

/// The seeded inputs checked at length `n`; one stream per length.
pub fn sample_inputs(seed: u64, n: usize, samples: usize) -> Vec<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    (0..samples).map(|_| (0..n).map(|_| rng.random()).collect()).collect()
}

fn summarize(n: usize, mode: Mode, checked: u64, found: Vec<Counterexample>, note: Option<String>) -> LengthCheck {
    LengthCheck {
        n,
        mode,
        checked,
        mismatches: found.len() as u64,
        counterexamples: found.into_iter().take(KEEP).collect(),
        note,
    }
}

pub fn verify(cfg: &VerifyConfig) -> anyhow::Result<VerifyReport> {
    let p = &cfg.params;
    let lengths = p.precision.dispatch(CheckJob { cfg })??;
    let n_top = cfg
        .exhaustive
        .iter()
        .chain(&cfg.sampled)
        .copied()
        .max()
        .unwrap_or(p.n_min)
        .max(p.n_min);
    let rows = gap_scan(p, n_top, false)?;
    Ok(VerifyReport {
        params: p.clone(),
        margins: Margins::from_rows(p, &rows, n_top),
        total_checked: lengths.iter().map(|l| l.checked).sum(),
        total_mismatches: lengths.iter().map(|l| l.mismatches).sum(),
        lengths,
    })
}

pub fn run(flags: &Flags) -> anyhow::Result<Outcome> {
    let cfg = VerifyConfig::from_flags(flags)?;
    let report = verify(&cfg)?;
    let pass = report.pass();
    let p = &report.params;
    let mut text = format!(
        "alpha {}  c {}  M {}  n_min {}  ({})\n",
        p.alpha, p.c, p.m, p.n_min, cfg.source
    );
    match &report.margins {
        Some(m) => text.push_str(&format!(
            "min gap/n^6 {:.6e} at n = {}  max z dev {:.3e} (restricted), {:.3e} (full, limit {:.3e})  {}\n\n",
            m.min_gap_over_n6,
            m.argmin_n,
            m.max_z_dev_restricted,
            m.max_z_dev_full,
            m.z_dev_full_limit,
            if m.ok { "ok" } else { "NOT CERTIFIED" }
        )),
        None => text.push_str("no certified lengths\n\n"),
    }
    let mut t = Table::new(["n", "mode", "checked", "mismatches", "note"]);
    for l in &report.lengths {
        t.push([
            l.n.to_string(),
            format!("{:?}", l.mode).to_lowercase(),
            l.checked.to_string(),
            l.mismatches.to_string(),
            l.note.clone().unwrap_or_default(),
        ]);
    }
    text.push_str(&t.to_string());
    let cx: Vec<String> = report
        .lengths
        .iter()
        .flat_map(|l| &l.counterexamples)
        .map(|c| format!("{}  expected {}  got {}", c.input, c.expected, c.got))
        .collect();
    if !cx.is_empty() {
        text.push_str("\ncounterexamples\n");
        text.push_str(&cx.join("\n"));
        text.push('\n');
    }
    let summary = match report.first_counterexample() {
        Some(c) => format!(
            "{} mismatches in {} inputs; counterexample {}",
            report.total_mismatches, report.total_checked, c.input
        ),
        None if !pass => "attention margins not certified".to_string(),
        None => format!("{} inputs, no mismatches", report.total_checked),
    };
    Ok(Outcome::new(
        COMMAND,
        &cfg,
        cfg.seed,
        p.precision.to_string(),
        pass,
        &report,
        text,
        summary,
    ))
}
