//! `calibrate` and `gap-scan`.

use parity_transformer::parity::calibrate::{calibration_report, gap_scan, GapRow};
use parity_transformer::parity::{CalibrationGrid, CalibrationReport, ConstructionParams};
use parity_transformer::real::PrecisionConfig;
use parity_transformer::report::Table;
use serde::{Deserialize, Serialize};

use crate::config::Flags;
use crate::output::Outcome;

pub const CALIBRATE: &str = "calibrate";
pub const GAP_SCAN: &str = "gap-scan";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrateConfig {
    pub grid: CalibrationGrid,
}

impl CalibrateConfig {
    pub fn from_flags(f: &Flags) -> Self {
        let mut g = CalibrationGrid::default();
        if let Some(a) = &f.alphas {
            g.alphas = a.clone();
        }
        if let Some(a) = f.alpha {
            g.alphas = vec![a];
        }
        if let Some(c) = &f.cs {
            g.cs = c.clone();
        }
        if let Some(c) = f.c {
            g.cs = vec![c];
        }
        if let Some(n) = f.n_max {
            g.n_cal = n;
        }
        if let Some(n) = f.n_min {
            g.n_min_cap = n;
        }
        if let Some(m) = f.m {
            g.max_m = m;
        }
        g.precision = f.precision;
        CalibrateConfig { grid: g }
    }
}

fn opt(x: Option<f64>, prec: usize) -> String {
    x.map_or("-".into(), |v| format!("{v:.prec$e}"))
}

pub fn candidates_table(r: &CalibrationReport) -> Table {
    let mut t = Table::new(["alpha", "c", "M", "n_min", "g0", "max z dev (full)", "feasible", "note"]);
    for c in &r.candidates {
        t.push([
            c.alpha.to_string(),
            c.c.to_string(),
            c.m.to_string(),
            c.n_min.to_string(),
            opt(c.g0, 4),
            opt(c.max_z_dev_full, 2),
            if c.feasible { "yes" } else { "no" }.to_string(),
            c.note.clone(),
        ]);
    }
    t
}

pub fn run_calibrate(flags: &Flags) -> anyhow::Result<Outcome> {
    let cfg = CalibrateConfig::from_flags(flags);
    let r = calibration_report(&cfg.grid)?;
    let pass = r.chosen.is_some();
    let mut text = match &r.chosen {
        Some(p) => format!(
            "chosen: alpha {}  c {}  M {}  n_min {}  g0 {}  alpha_max {}\n\n",
            p.alpha,
            p.c,
            p.m,
            p.n_min,
            opt(r.g0, 6),
            r.alpha_max.map_or("-".into(), |a| a.to_string())
        ),
        None => "no feasible point on the grid\n\n".to_string(),
    };
    text.push_str(&candidates_table(&r).to_string());
    if !pass {
        eprint!("{}", candidates_table(&r));
    }
    let summary = match &r.chosen {
        Some(p) => format!("alpha {} c {} M {} n_min {}", p.alpha, p.c, p.m, p.n_min),
        None => format!("none of {} grid points is feasible", r.candidates.len()),
    };
    let precision = r.scan_precision.to_string();
    Ok(Outcome::new(CALIBRATE, &cfg, None, precision, pass, &r, text, summary))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapScanConfig {
    pub params: ConstructionParams,
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapScanReport {
    /// Smallest `gap / n^6` over rows with `n >= n_min`.
    pub g0: Option<f64>,
    pub rows: Vec<GapRow>,
    /// Certified rows with a nonpositive gap or a z deviation over its limit.
    pub failing: Vec<usize>,
}

pub fn run_gap_scan(flags: &Flags) -> anyhow::Result<Outcome> {
    let mut p = ConstructionParams::calibrated();
    if let Some(a) = flags.alpha {
        p.alpha = a;
    }
    if let Some(c) = flags.c {
        p.c = c;
        p.m = flags.m.unwrap_or(ConstructionParams::smallest_m(c));
    }
    if let Some(m) = flags.m {
        p.m = m;
    }
    if let Some(n) = flags.n_min {
        p.n_min = n;
    }
    p.precision = flags.precision.unwrap_or(PrecisionConfig::Extended { mantissa_bits: 106 });
    let cfg = GapScanConfig {
        n_max: flags.n_max.unwrap_or(512),
        params: p,
    };
    let rows = gap_scan(&cfg.params, cfg.n_max, false)?;
    let limit = 0.05 / cfg.params.m as f64;
    let certified: Vec<&GapRow> = rows.iter().filter(|r| r.certified).collect();
    let g0 = certified.iter().map(|r| r.min_gap_over_n6).reduce(f64::min);
    let failing: Vec<usize> = certified
        .iter()
        .filter(|r| !(r.min_gap_over_n6 > 0.0 && r.max_z_dev_restricted <= 0.1 && r.max_z_dev_full < limit))
        .map(|r| r.n)
        .collect();
    let pass = !certified.is_empty() && failing.is_empty();
    let mut t = Table::new(["n", "sigma max", "split max", "min gap/n^6", "argmin", "z dev", "z dev (split)", "certified"]);
    for r in &rows {
        t.push([
            r.n.to_string(),
            r.restricted_sigma_max.to_string(),
            r.full_sigma_max.to_string(),
            format!("{:.6e}", r.min_gap_over_n6),
            r.argmin_sigma.to_string(),
            format!("{:.2e}", r.max_z_dev_restricted),
            format!("{:.2e}", r.max_z_dev_full),
            if r.certified { "yes" } else { "no" }.to_string(),
        ]);
    }
    let p = &cfg.params;
    let text = format!(
        "alpha {}  c {}  M {}  n_min {}  g0 {}\n\n{t}",
        p.alpha,
        p.c,
        p.m,
        p.n_min,
        opt(g0, 6)
    );
    let summary = if pass {
        format!("g0 {}", opt(g0, 6))
    } else if certified.is_empty() {
        "no lengths at or above n_min".into()
    } else {
        format!("{} certified lengths fail, first n = {}", failing.len(), failing[0])
    };
    let report = GapScanReport { g0, rows, failing };
    Ok(Outcome::new(GAP_SCAN, &cfg, None, p.precision.to_string(), pass, &report, text, summary))
}
