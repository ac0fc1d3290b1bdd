//! `lemmas`: asymptotic checks on the power sums, the Γ bound and W.

use parity_transformer::asymptotics::{geometric_grid, LemmaReport, LemmaSuite};
use parity_transformer::report::Table;
use serde::{Deserialize, Serialize};

use crate::config::Flags;
use crate::output::Outcome;

pub const COMMAND: &str = "lemmas";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmasConfig {
    pub suite: LemmaSuite,
}

impl LemmasConfig {
    pub fn from_flags(f: &Flags) -> anyhow::Result<Self> {
        let mut s = LemmaSuite::default();
        if let Some(e) = &f.exponents {
            s.faulhaber_alphas = e.clone();
        }
        if let Some(o) = f.order {
            s.order = o;
        }
        if let Some(a) = f.alpha {
            s.gamma_alphas = vec![a];
            s.w_alpha = a;
        }
        if let Some(p) = f.precision {
            s.precision = p;
        }
        if f.n_min.is_some() || f.n_max.is_some() {
            let hi = f.n_max.unwrap_or(4096);
            let lo = match f.n_min {
                Some(lo) => lo,
                None if hi < 16 => 2,
                None => 16,
            };
            anyhow::ensure!(lo >= 1 && lo <= hi, "need 1 <= n-min <= n-max, got {lo} and {hi}");
            s.faulhaber_ns = geometric_grid(lo, hi);
            s.gamma_ns = s.faulhaber_ns.clone();
            s.w_ns = geometric_grid(lo.max(64.min(hi)), hi);
        }
        for a in &s.faulhaber_alphas {
            s.order.check_alpha(*a)?;
        }
        Ok(LemmasConfig { suite: s })
    }
}

pub fn run(flags: &Flags) -> anyhow::Result<Outcome> {
    let cfg = LemmasConfig::from_flags(flags)?;
    let reports: Vec<LemmaReport> = cfg.suite.run()?;
    let pass = reports.iter().all(|r| r.pass);
    let mut t = Table::new(["check", "series", "constant", "result"]);
    for r in &reports {
        t.push([
            r.lemma.to_string(),
            r.series.len().to_string(),
            format!("{:.4e}", r.fitted_constant),
            if r.pass { "pass" } else { "FAIL" }.to_string(),
        ]);
    }
    let mut text = t.to_string();
    let mut s = Table::new(["series", "claim", "midpoint", "top half", "result"]);
    for r in &reports {
        for x in &r.series {
            s.push([
                x.label.clone(),
                format!("{:?}", x.claim).to_lowercase(),
                format!("{:.4e}", x.midpoint),
                format!("{:.4e}", x.top_half),
                if x.pass { "pass" } else { "FAIL" }.to_string(),
            ]);
        }
    }
    text.push('\n');
    text.push_str(&s.to_string());
    let warnings: Vec<String> = reports
        .iter()
        .flat_map(|r| r.warnings.iter().map(move |w| format!("{}: {w}", r.lemma)))
        .collect();
    for w in &warnings {
        text.push_str(&format!("\nwarning: {w}"));
        eprintln!("warning: {w}");
    }
    if !warnings.is_empty() {
        text.push('\n');
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| r.lemma.to_string()).collect();
    let summary = if failed.is_empty() {
        format!("{} checks", reports.len())
    } else {
        format!("failed: {}", failed.join(", "))
    };
    Ok(Outcome::new(
        COMMAND,
        &cfg,
        None,
        cfg.suite.precision.to_string(),
        pass,
        &reports,
        text,
        summary,
    ))
}
