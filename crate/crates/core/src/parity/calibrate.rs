//! Search for `(α, c, M, n_min)`.
//!
//! For every `α` on the grid the attention gap and the `z` deviation are
//! tabulated over `2 <= n <= n_cal` and all weights either model can present
//! to its `z` layer. Each `c` then yields `M` (smallest even integer above
//! `2/c`) and two certified ranges:
//!
//! * restricted: `1 <= Σ <= floor(c n)` with gap `> 0` and `|z - (-1)^Σ| <= 0.1`;
//! * full: `1 <= Σ <= 1 + ceil(n/M)` (every split weight), `n >= M`, with gap
//!   `> 0` and deviation `< 0.05/M`, which keeps the sign-pattern readout on
//!   the right side of its threshold.
//!
//! `n_min` is one more than the largest failing length of either range.
//! Among feasible points the search prefers the smallest `n_min`, then the
//! smallest `M`, then the largest `g0 = min gap/n^6`, then smaller `α`, `c`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::formulas::{gap_from_logits, layer3_logits_with, z_from_logits, DerivedConstants, PowerTable};
use super::split::max_split_weight;
use super::ConstructionParams;
use crate::error::{Error, Result};
use crate::real::{PrecisionConfig, Real, WithReal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub alphas: Vec<f64>,
    pub cs: Vec<f64>,
    /// Largest length scanned.
    pub n_cal: usize,
    /// Feasible points must have `n_min <= n_min_cap`.
    pub n_min_cap: usize,
    pub max_m: usize,
    /// Backend for the scan; `None` picks double up to `n_cal = 1024` and
    /// double-double above.
    pub precision: Option<PrecisionConfig>,
    /// Include every `(n, Σ)` gap in the report, not just per-`n` minima.
    pub full_table: bool,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        CalibrationGrid {
            alphas: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            cs: vec![0.21, 0.26, 0.34, 0.51],
            n_cal: 512,
            n_min_cap: 64,
            max_m: 10,
            precision: None,
            full_table: false,
        }
    }
}

impl CalibrationGrid {
    pub fn scan_precision(&self) -> PrecisionConfig {
        self.precision.unwrap_or(if self.n_cal <= 1024 {
            PrecisionConfig::Double
        } else {
            PrecisionConfig::Extended { mantissa_bits: 106 }
        })
    }

    fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.cs.is_empty() {
            return Err(Error::Calibration("empty search grid".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::InvalidInput(format!("α = {a} outside (0, 1)")));
        }
        if let Some(c) = self.cs.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
            return Err(Error::InvalidInput(format!("c = {c} outside (0, 1)")));
        }
        if self.n_cal < 4 {
            return Err(Error::InvalidInput("n_cal must be at least 4".into()));
        }
        Ok(())
    }
}

/// Per length `n`: gap over `n^6` and `z` deviation for `Σ = 1, 2, ...`.
pub type ScanRows = Vec<(Vec<f64>, Vec<f64>)>;

/// Scans lengths `2..=n_cal` for one `α`, weights up to `sigma_hi(n)`.
pub fn scan_alpha<S: Real>(alpha: f64, n_cal: usize, sigma_hi: impl Fn(usize) -> usize) -> Result<ScanRows> {
    let k = DerivedConstants::<S>::new(alpha);
    let mut out = Vec::with_capacity(n_cal + 1);
    out.push((vec![], vec![]));
    out.push((vec![], vec![]));
    for n in 2..=n_cal {
        let table = PowerTable::<S>::new(n);
        let n6 = S::from_usize(n).powi(6);
        let top = sigma_hi(n).min(n);
        let mut gaps = Vec::with_capacity(top);
        let mut devs = Vec::with_capacity(top);
        for sigma in 1..=top {
            let logits = layer3_logits_with(sigma, n, &k, &table)?;
            let gap = gap_from_logits(&logits, sigma);
            let (_, dev) = z_from_logits(&logits, sigma)?;
            gaps.push((gap / n6.clone()).to_f64());
            devs.push(dev.to_f64());
        }
        out.push((gaps, devs));
    }
    Ok(out)
}

struct ScanJob<'a> {
    alpha: f64,
    n_cal: usize,
    sigma_hi: &'a (dyn Fn(usize) -> usize + Sync),
}

impl WithReal for ScanJob<'_> {
    type Output = Result<ScanRows>;
    fn run<S: Real>(self) -> Self::Output {
        scan_alpha::<S>(self.alpha, self.n_cal, self.sigma_hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub alpha: f64,
    pub c: f64,
    pub m: usize,
    /// Smallest length from which the restricted range is certified.
    pub n_min_restricted: usize,
    /// Same for the full model's split weights.
    pub n_min_full: usize,
    pub n_min: usize,
    pub feasible: bool,
    /// `min gap / n^6` over both ranges for `n_min <= n <= n_cal`.
    pub g0: Option<f64>,
    pub max_z_dev_restricted: Option<f64>,
    pub max_z_dev_full: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    pub restricted_sigma_max: usize,
    pub full_sigma_max: usize,
    pub min_gap_over_n6: f64,
    pub argmin_sigma: usize,
    pub max_z_dev_restricted: f64,
    pub max_z_dev_full: f64,
    pub certified: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gaps_over_n6: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub grid: CalibrationGrid,
    pub scan_precision: PrecisionConfig,
    pub candidates: Vec<Candidate>,
    pub chosen: Option<ConstructionParams>,
    pub g0: Option<f64>,
    /// Largest grid `α` with at least one feasible `c`.
    pub alpha_max: Option<f64>,
    /// Per-length gaps for the chosen point.
    pub gap_table: Vec<GapRow>,
}

struct Tables {
    alpha: f64,
    rows: ScanRows,
}

fn assess(t: &Tables, c: f64, grid: &CalibrationGrid) -> Candidate {
    let m = ConstructionParams::smallest_m(c);
    let n_cal = grid.n_cal;
    let r_hi = |n: usize| ((c * n as f64).floor() as usize).min(n);
    let f_hi = |n: usize| max_split_weight(n, m).min(n);
    let eps = 0.05 / m as f64;
    let mut last_bad_r = 1;
    let mut last_bad_f = m.saturating_sub(1).max(1);
    for n in 2..=n_cal {
        let (gaps, devs) = &t.rows[n];
        let bad_r = (0..r_hi(n)).any(|s| !(gaps[s] > 0.0) || !(devs[s] <= 0.1));
        if bad_r {
            last_bad_r = n;
        }
        if n >= m {
            let bad_f = (0..f_hi(n)).any(|s| !(gaps[s] > 0.0) || !(devs[s] < eps));
            if bad_f {
                last_bad_f = n;
            }
        }
    }
    let n_min_restricted = last_bad_r + 1;
    let n_min_full = last_bad_f + 1;
    let n_min = n_min_restricted.max(n_min_full);
    let mut note = String::new();
    if m > grid.max_m {
        note = format!("M = {m} exceeds the cap {}", grid.max_m);
    } else if n_min > grid.n_min_cap {
        note = if n_min > n_cal {
            format!("fails at n = {n_cal}")
        } else {
            format!("n_min = {n_min} exceeds the cap {}", grid.n_min_cap)
        };
    }
    let feasible = note.is_empty();
    let (mut g0, mut zr, mut zf) = (None::<f64>, None::<f64>, None::<f64>);
    if n_min <= n_cal {
        for n in n_min..=n_cal {
            let (gaps, devs) = &t.rows[n];
            let top = r_hi(n).max(f_hi(n));
            for s in 0..top {
                g0 = Some(g0.map_or(gaps[s], |g| g.min(gaps[s])));
            }
            for s in 0..r_hi(n) {
                zr = Some(zr.map_or(devs[s], |z| z.max(devs[s])));
            }
            for s in 0..f_hi(n) {
                zf = Some(zf.map_or(devs[s], |z| z.max(devs[s])));
            }
        }
    }
    Candidate {
        alpha: t.alpha,
        c,
        m,
        n_min_restricted,
        n_min_full,
        n_min,
        feasible,
        g0,
        max_z_dev_restricted: zr,
        max_z_dev_full: zf,
        note,
    }
}

fn gap_table(t: &Tables, p: &ConstructionParams, full_table: bool) -> Vec<GapRow> {
    // lengths with no weight to check are left out
    (2..t.rows.len())
        .filter_map(|n| {
            let (gaps, devs) = &t.rows[n];
            let r_hi = p.restricted_sigma_max(n).min(n);
            let f_hi = if n >= p.m { max_split_weight(n, p.m).min(n) } else { 0 };
            let top = r_hi.max(f_hi);
            if top == 0 {
                return None;
            }
            let (mut best, mut arg) = (f64::INFINITY, 0);
            for s in 0..top {
                if gaps[s] < best {
                    best = gaps[s];
                    arg = s + 1;
                }
            }
            let max_of = |k: usize| devs[..k].iter().copied().fold(0.0, f64::max);
            Some(GapRow {
                n,
                restricted_sigma_max: r_hi,
                full_sigma_max: f_hi,
                min_gap_over_n6: best,
                argmin_sigma: arg,
                max_z_dev_restricted: max_of(r_hi),
                max_z_dev_full: max_of(f_hi),
                certified: n >= p.n_min,
                gaps_over_n6: full_table.then(|| gaps[..top].to_vec()),
            })
        })
        .collect()
}

/// Runs the search. An empty feasible set is an error whose message carries
/// the feasibility table; the full report is still available through
/// [`calibration_report`].
pub fn calibrate(grid: &CalibrationGrid) -> Result<(ConstructionParams, CalibrationReport)> {
    let report = calibration_report(grid)?;
    match &report.chosen {
        Some(p) => Ok((p.clone(), report)),
        None => {
            let table: Vec<String> = report
                .candidates
                .iter()
                .map(|c| format!("α = {} c = {} M = {} n_min = {}: {}", c.alpha, c.c, c.m, c.n_min, c.note))
                .collect();
            Err(Error::Calibration(format!(
                "no feasible point on the grid\n{}",
                table.join("\n")
            )))
        }
    }
}

pub fn calibration_report(grid: &CalibrationGrid) -> Result<CalibrationReport> {
    grid.validate()?;
    let precision = grid.scan_precision();
    let c_max = grid.cs.iter().copied().fold(0.0, f64::max);
    let m_min = grid
        .cs
        .iter()
        .map(|&c| ConstructionParams::smallest_m(c))
        .min()
        .expect("non-empty");
    let sigma_hi = move |n: usize| ((c_max * n as f64).floor() as usize).max(max_split_weight(n, m_min));
    let tables: Vec<Tables> = grid
        .alphas
        .par_iter()
        .map(|&alpha| {
            let rows = precision.dispatch(ScanJob {
                alpha,
                n_cal: grid.n_cal,
                sigma_hi: &sigma_hi,
            })??;
            Ok(Tables { alpha, rows })
        })
        .collect::<Result<_>>()?;
    let mut candidates = Vec::new();
    for t in &tables {
        for &c in &grid.cs {
            candidates.push(assess(t, c, grid));
        }
    }
    let best = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.feasible)
        .min_by(|(_, a), (_, b)| {
            a.n_min
                .cmp(&b.n_min)
                .then(a.m.cmp(&b.m))
                .then(b.g0.unwrap_or(f64::NEG_INFINITY).total_cmp(&a.g0.unwrap_or(f64::NEG_INFINITY)))
                .then(a.alpha.total_cmp(&b.alpha))
                .then(a.c.total_cmp(&b.c))
        })
        .map(|(k, _)| k);
    let alpha_max = candidates
        .iter()
        .filter(|c| c.feasible)
        .map(|c| c.alpha)
        .reduce(f64::max);
    let (chosen, g0, table) = match best {
        Some(k) => {
            let c = &candidates[k];
            let p = ConstructionParams {
                alpha: c.alpha,
                c: c.c,
                m: c.m,
                n_min: c.n_min,
                precision,
            };
            let t = tables.iter().find(|t| t.alpha == c.alpha).expect("scanned");
            let rows = gap_table(t, &p, grid.full_table);
            (Some(p), c.g0, rows)
        }
        None => (None, None, Vec::new()),
    };
    Ok(CalibrationReport {
        grid: grid.clone(),
        scan_precision: precision,
        candidates,
        chosen,
        g0,
        alpha_max,
        gap_table: table,
    })
}

/// Per-length gap table for explicit constants, certified or not.
pub fn gap_scan(params: &ConstructionParams, n_max: usize, full_table: bool) -> Result<Vec<GapRow>> {
    params.validate()?;
    let hi = {
        let p = params.clone();
        move |n: usize| p.restricted_sigma_max(n).max(if n >= p.m { max_split_weight(n, p.m) } else { 0 })
    };
    let rows = params.precision.dispatch(ScanJob {
        alpha: params.alpha,
        n_cal: n_max,
        sigma_hi: &hi,
    })??;
    Ok(gap_table(
        &Tables {
            alpha: params.alpha,
            rows,
        },
        params,
        full_table,
    ))
}
