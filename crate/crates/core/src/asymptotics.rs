//! Numeric checks of the asymptotic statements behind the construction.
//!
//! An `O(g(n))` claim becomes a series `r(n) = |remainder| / g(n)` over a
//! geometric grid of lengths. The series is stable when the largest value in
//! the top half of the grid is at most twice the value at the midpoint. An
//! `Ω(g(n))` claim is the mirror image: the smallest value in the top half
//! must be at least half the midpoint value, and the midpoint must be
//! positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parity::formulas::{f0, f_rho, fprime0, gamma_exact, rho, tau, PowerTable};
use crate::real::{compensated_sum, PrecisionConfig, Real, WithReal};

/// Truncation order of the power-sum expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Order {
    Zero,
    One,
    Two,
}

impl Order {
    pub fn as_u8(self) -> u8 {
        match self {
            Order::Zero => 0,
            Order::One => 1,
            Order::Two => 2,
        }
    }

    /// Exponents for which the expansion is claimed.
    pub fn alpha_range(self) -> (f64, f64) {
        match self {
            Order::Zero => (0.0, 100.0),
            Order::One => (2.0, 100.0),
            Order::Two => (5.0, 100.0),
        }
    }

    pub fn check_alpha(self, alpha: f64) -> Result<()> {
        let (lo, hi) = self.alpha_range();
        if alpha.is_nan() || alpha < lo || alpha > hi {
            return Err(Error::Range(format!(
                "order {} expansion needs α in [{lo}, {hi}], got {alpha}",
                self.as_u8()
            )));
        }
        Ok(())
    }
}

impl From<Order> for u8 {
    fn from(o: Order) -> u8 {
        o.as_u8()
    }
}

impl TryFrom<u8> for Order {
    type Error = Error;
    fn try_from(k: u8) -> Result<Self> {
        match k {
            0 => Ok(Order::Zero),
            1 => Ok(Order::One),
            2 => Ok(Order::Two),
            _ => Err(Error::InvalidInput(format!("order must be 0, 1 or 2, got {k}"))),
        }
    }
}

impl std::str::FromStr for Order {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let k: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("order must be 0, 1 or 2, got {s:?}")))?;
        Order::try_from(k)
    }
}

/// `i^α`, by repeated squaring when `α` is a small nonnegative integer.
fn pow<S: Real>(i: usize, alpha: f64) -> S {
    if alpha >= 0.0 && alpha.fract() == 0.0 && alpha <= 64.0 {
        S::from_usize(i).powi(alpha as u32)
    } else if i == 1 {
        S::one()
    } else {
        (S::from_f64(alpha) * S::from_usize(i).ln()).exp()
    }
}

/// `1^α + ... + n^α` by direct compensated summation.
pub fn power_sum<S: Real>(alpha: f64, n: usize) -> Result<S> {
    if n == 0 {
        return Err(Error::InvalidInput("power sum needs n >= 1".into()));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("power sum needs α >= 0, got {alpha}")));
    }
    Ok(compensated_sum((1..=n).map(|i| pow::<S>(i, alpha))))
}

/// Power sums at every length in `ns` (ascending), one pass.
fn power_sums_at<S: Real>(alpha: f64, ns: &[usize]) -> Vec<S> {
    let mut out = Vec::with_capacity(ns.len());
    let mut acc = S::zero();
    let mut from = 1;
    for &n in ns {
        let block = compensated_sum((from..=n).map(|i| pow::<S>(i, alpha)));
        acc = acc + block;
        out.push(acc.clone());
        from = n + 1;
    }
    out
}

/// `n^{α+1}/(α+1) [+ n^α/2 [+ α n^{α-1}/12]]`.
pub fn faulhaber_expansion<S: Real>(alpha: f64, n: usize, order: Order) -> Result<S> {
    order.check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::InvalidInput("expansion needs n >= 1".into()));
    }
    let a = S::from_f64(alpha);
    let nn = S::from_usize(n);
    let p = |e: f64| (S::from_f64(e) * nn.ln()).exp();
    let mut v = p(alpha + 1.0) / (a.clone() + S::one());
    if order != Order::Zero {
        v = v + p(alpha) / S::from_i64(2);
    }
    if order == Order::Two {
        v = v + a * p(alpha - 1.0) / S::from_i64(12);
    }
    Ok(v)
}

/// `|S_α(n) - expansion| / n^{α - order}`.
pub fn faulhaber_remainder_ratio<S: Real>(alpha: f64, n: usize, order: Order) -> Result<f64> {
    let s = power_sum::<S>(alpha, n)?;
    ratio_from_sum(s, alpha, n, order)
}

fn ratio_from_sum<S: Real>(s: S, alpha: f64, n: usize, order: Order) -> Result<f64> {
    let e = faulhaber_expansion::<S>(alpha, n, order)?;
    let scale = (S::from_f64(alpha - order.as_u8() as f64) * S::from_usize(n).ln()).exp();
    finite(((s - e).abs() / scale).to_f64(), "power-sum remainder ratio")
}

fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Precision(format!("{what} is not finite")))
    }
}

/// Direction of an asymptotic claim.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    /// `O(g)`: the ratio stays bounded.
    Upper,
    /// `Ω(g)`: the ratio stays away from zero.
    Lower,
}

/// One ratio series over the length grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub claim: Claim,
    pub ns: Vec<usize>,
    pub ratios: Vec<f64>,
    pub midpoint: f64,
    /// Largest (upper) or smallest (lower) ratio in the top half.
    pub top_half: f64,
    /// `2 × midpoint` for upper claims, `midpoint / 2` for lower ones.
    pub limit: f64,
    /// Upper claims: ratios this small are rounding noise and compare as 0.
    #[serde(default)]
    pub noise_floor: f64,
    pub pass: bool,
}

impl Series {
    pub fn assess(label: impl Into<String>, claim: Claim, ns: Vec<usize>, ratios: Vec<f64>) -> Self {
        Self::assess_with_floor(label, claim, ns, ratios, 0.0)
    }

    pub fn assess_with_floor(
        label: impl Into<String>,
        claim: Claim,
        ns: Vec<usize>,
        ratios: Vec<f64>,
        noise_floor: f64,
    ) -> Self {
        assert_eq!(ns.len(), ratios.len());
        assert!(!ns.is_empty(), "empty grid");
        let mid = ratios.len() / 2;
        let midpoint = ratios[mid];
        let top = &ratios[mid..];
        let (top_half, limit, pass) = match claim {
            Claim::Upper => {
                let m = top.iter().copied().fold(0.0, f64::max);
                let limit = 2.0 * midpoint.max(noise_floor);
                (m, limit, m <= limit)
            }
            Claim::Lower => {
                let m = top.iter().copied().fold(f64::INFINITY, f64::min);
                (m, midpoint / 2.0, midpoint > 0.0 && m >= midpoint / 2.0)
            }
        };
        Series {
            label: label.into(),
            claim,
            ns,
            ratios,
            midpoint,
            top_half,
            limit,
            noise_floor,
            pass,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaId {
    PowerSumOrder0,
    PowerSumOrder1,
    PowerSumOrder2,
    GammaBound,
    WBounds,
}

impl LemmaId {
    pub fn for_order(o: Order) -> Self {
        match o {
            Order::Zero => LemmaId::PowerSumOrder0,
            Order::One => LemmaId::PowerSumOrder1,
            Order::Two => LemmaId::PowerSumOrder2,
        }
    }
}

impl std::fmt::Display for LemmaId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LemmaId::PowerSumOrder0 => "power-sum-order-0",
            LemmaId::PowerSumOrder1 => "power-sum-order-1",
            LemmaId::PowerSumOrder2 => "power-sum-order-2",
            LemmaId::GammaBound => "gamma-bound",
            LemmaId::WBounds => "w-bounds",
        };
        f.write_str(s)
    }
}

/// Grid a report was computed on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaGrid {
    pub ns: Vec<usize>,
    pub alphas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigmas: Vec<SigmaRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Order>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: LemmaId,
    pub grid: LemmaGrid,
    pub series: Vec<Series>,
    /// Largest top-half ratio over upper series, or smallest over lower
    /// series when there are no upper ones.
    pub fitted_constant: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Extra per-point detail (Γ envelope, W extrema).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<serde_json::Value>,
}

impl LemmaReport {
    fn new(lemma: LemmaId, grid: LemmaGrid, series: Vec<Series>) -> Self {
        let uppers: Vec<f64> = series.iter().filter(|s| s.claim == Claim::Upper).map(|s| s.top_half).collect();
        let fitted_constant = if uppers.is_empty() {
            series.iter().map(|s| s.top_half).fold(f64::INFINITY, f64::min)
        } else {
            uppers.into_iter().fold(0.0, f64::max)
        };
        let mut warnings = Vec::new();
        let n_max = grid.ns.iter().copied().max().unwrap_or(0);
        if grid.ns.len() < 4 || n_max <= 8 {
            warnings.push(format!(
                "insufficient asymptotic range: {} lengths up to n = {n_max}",
                grid.ns.len()
            ));
        }
        let pass = series.iter().all(|s| s.pass);
        LemmaReport {
            lemma,
            grid,
            series,
            fitted_constant,
            pass,
            warnings,
            points: Vec::new(),
        }
    }
}

fn check_grid(ns: &[usize], alphas: &[f64]) -> Result<Vec<usize>> {
    if ns.is_empty() || alphas.is_empty() {
        return Err(Error::InvalidInput("lemma grid is empty".into()));
    }
    if ns.contains(&0) {
        return Err(Error::InvalidInput("lengths must be positive".into()));
    }
    let mut v = ns.to_vec();
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

/// `n = lo, 2 lo, 4 lo, ..., <= hi`.
pub fn geometric_grid(lo: usize, hi: usize) -> Vec<usize> {
    std::iter::successors(Some(lo.max(1)), |n| n.checked_mul(2))
        .take_while(|n| *n <= hi)
        .collect()
}

/// Remainder-ratio series of the order-`order` expansion, one per `α`.
pub fn check_faulhaber<S: Real>(alphas: &[f64], ns: &[usize], order: Order) -> Result<LemmaReport> {
    let ns = check_grid(ns, alphas)?;
    for &a in alphas {
        order.check_alpha(a)?;
    }
    let mut series = Vec::new();
    for &a in alphas {
        let sums = power_sums_at::<S>(a, &ns);
        let ratios = ns
            .iter()
            .zip(sums)
            .map(|(&n, s)| ratio_from_sum(s, a, n, order))
            .collect::<Result<Vec<_>>>()?;
        // rounding in S_α(n) is about eps n^{α+1}, i.e. eps n^{order+1} in ratio units
        let n_max = *ns.last().expect("non-empty") as f64;
        let floor = 1024.0 * S::epsilon().to_f64() * n_max.powi(order.as_u8() as i32 + 1);
        series.push(Series::assess_with_floor(format!("α = {a}"), Claim::Upper, ns.clone(), ratios, floor));
    }
    Ok(LemmaReport::new(
        LemmaId::for_order(order),
        LemmaGrid {
            ns,
            alphas: alphas.to_vec(),
            sigmas: vec![],
            order: Some(order),
        },
        series,
    ))
}

/// How `Σ` is chosen at each length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaRule {
    One,
    Two,
    Sqrt,
    Half,
    Full,
}

impl SigmaRule {
    pub const ALL: [SigmaRule; 5] = [SigmaRule::One, SigmaRule::Two, SigmaRule::Sqrt, SigmaRule::Half, SigmaRule::Full];

    pub fn at(self, n: usize) -> usize {
        let s = match self {
            SigmaRule::One => 1,
            SigmaRule::Two => 2,
            SigmaRule::Sqrt => (n as f64).sqrt().floor() as usize,
            SigmaRule::Half => n / 2,
            SigmaRule::Full => n,
        };
        s.clamp(1, n)
    }
}

/// One point of the `Γ ≈ τ_n f(ρ)` check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub sigma: usize,
    pub n: usize,
    pub alpha: f64,
    pub rho: f64,
    /// `|Γ / (τ_n f(ρ)) - 1|`.
    pub rel_err: f64,
    /// `rel_err / (ρ/n^2 + 1/n^3)`.
    pub ratio: f64,
    pub gamma_over_tau: f64,
    pub f_rho: f64,
    /// `f(ρ)/2 < Γ/τ_n < 2 f(ρ)`.
    pub in_envelope: bool,
}

pub fn check_gamma_bound<S: Real>(sigma: usize, n: usize, alpha: f64) -> Result<GammaPoint> {
    gamma_point(sigma, n, alpha, &PowerTable::<S>::new(n))
}

fn gamma_point<S: Real>(sigma: usize, n: usize, alpha: f64, table: &PowerTable<S>) -> Result<GammaPoint> {
    let a = S::from_f64(alpha);
    let g = gamma_exact(sigma, n, &a)?;
    let big = table.big_gamma(&g);
    let r = rho(sigma, n, &a);
    let f = f_rho(&r)?;
    let t = tau::<S>(n);
    let q = big / t;
    let rel = (q.clone() / f.clone() - S::one()).abs();
    let nn = S::from_usize(n);
    let scale = r.clone() / (nn.clone() * nn.clone()) + S::one() / nn.powi(3);
    let in_envelope = q.clone() > f.clone() / S::from_i64(2) && q.clone() < S::from_i64(2) * f.clone();
    Ok(GammaPoint {
        sigma,
        n,
        alpha,
        rho: r.to_f64(),
        rel_err: finite(rel.to_f64(), "Γ relative error")?,
        ratio: finite((rel / scale).to_f64(), "Γ ratio")?,
        gamma_over_tau: q.to_f64(),
        f_rho: f.to_f64(),
        in_envelope,
    })
}

/// `Γ`-bound ratio series for every `(α, Σ rule)`; also requires the loose
/// envelope at every point with `n >= 16`.
pub fn check_gamma_grid<S: Real>(alphas: &[f64], ns: &[usize], sigmas: &[SigmaRule]) -> Result<LemmaReport> {
    let ns = check_grid(ns, alphas)?;
    if sigmas.is_empty() {
        return Err(Error::InvalidInput("no Σ rule given".into()));
    }
    let mut pts: Vec<Vec<GammaPoint>> = vec![Vec::new(); alphas.len() * sigmas.len()];
    for &n in &ns {
        let table = PowerTable::<S>::new(n);
        for (ka, &a) in alphas.iter().enumerate() {
            for (ks, rule) in sigmas.iter().enumerate() {
                pts[ka * sigmas.len() + ks].push(gamma_point(rule.at(n), n, a, &table)?);
            }
        }
    }
    let mut series = Vec::new();
    let mut envelope_ok = true;
    let mut points = Vec::new();
    for (k, p) in pts.iter().enumerate() {
        let (a, rule) = (alphas[k / sigmas.len()], sigmas[k % sigmas.len()]);
        series.push(Series::assess(
            format!("α = {a}, Σ = {rule:?}"),
            Claim::Upper,
            ns.clone(),
            p.iter().map(|g| g.ratio).collect(),
        ));
        for g in p {
            if g.n >= 16 && !g.in_envelope {
                envelope_ok = false;
            }
            points.push(serde_json::to_value(g)?);
        }
    }
    let mut r = LemmaReport::new(
        LemmaId::GammaBound,
        LemmaGrid {
            ns,
            alphas: alphas.to_vec(),
            sigmas: sigmas.to_vec(),
            order: None,
        },
        series,
    );
    if !envelope_ok {
        r.pass = false;
        r.warnings.push("Γ/τ_n left (f/2, 2f) at some n >= 16".into());
    }
    r.points = points;
    Ok(r)
}

/// One point of the `W_i` check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WPoint {
    pub sigma: usize,
    pub n: usize,
    pub alpha: f64,
    /// `-W_Σ Σ^4 / α^4`, bounded above.
    pub w_sigma_scaled: f64,
    /// `min_{i != Σ} -W_i / (α^2 (1/i - 1/Σ)^2)`, bounded below.
    pub off_peak_scaled: Option<f64>,
    pub argmin_i: Option<usize>,
    /// `max_i W_i`, never positive.
    pub max_w: f64,
}

/// `W_1..W_n` for weight `Σ`.
pub fn w_values<S: Real>(alpha: f64, sigma: usize, n: usize) -> Result<Vec<S>> {
    if sigma == 0 || sigma > n {
        return Err(Error::Range(format!("W needs 1 <= Σ <= n, got Σ = {sigma}, n = {n}")));
    }
    let a = S::from_f64(alpha);
    let r = rho(sigma, n, &a);
    let fr = f_rho(&r)?;
    let base = fr - f0::<S>();
    let inv_n = S::one() / S::from_usize(n);
    Ok((1..=n)
        .map(|i| {
            let t = base.clone() - fprime0::<S>() * a.clone() * (S::one() / S::from_usize(i) - inv_n.clone());
            -(t.clone() * t)
        })
        .collect())
}

pub fn check_w_bounds<S: Real>(alpha: f64, sigma: usize, n: usize) -> Result<WPoint> {
    let w = w_values::<S>(alpha, sigma, n)?;
    let a = S::from_f64(alpha);
    let s = S::from_usize(sigma);
    let w_sigma_scaled = (-w[sigma - 1].clone()) * s.powi(4) / a.powi(4);
    let inv_s = S::one() / s;
    let mut best: Option<(f64, usize)> = None;
    for (k, wi) in w.iter().enumerate() {
        let i = k + 1;
        if i == sigma {
            continue;
        }
        let d = S::one() / S::from_usize(i) - inv_s.clone();
        let v = ((-wi.clone()) / (a.clone() * a.clone() * d.clone() * d)).to_f64();
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, i));
        }
    }
    let max_w = w.iter().map(Real::to_f64).fold(f64::NEG_INFINITY, f64::max);
    Ok(WPoint {
        sigma,
        n,
        alpha,
        w_sigma_scaled: finite(w_sigma_scaled.to_f64(), "W_Σ ratio")?,
        off_peak_scaled: best.map(|b| b.0),
        argmin_i: best.map(|b| b.1),
        max_w,
    })
}

/// For each length: the largest `-W_Σ Σ^4/α^4` and the smallest off-peak
/// ratio over `1 <= Σ <= floor(sqrt n)`. Fails if any `W_i > 0`.
pub fn check_w_grid<S: Real>(alpha: f64, ns: &[usize]) -> Result<LemmaReport> {
    let ns = check_grid(ns, &[alpha])?;
    let (mut upper, mut lower) = (Vec::new(), Vec::new());
    let mut points = Vec::new();
    let mut nonpositive = true;
    for &n in &ns {
        let top = ((n as f64).sqrt().floor() as usize).max(1);
        let (mut u, mut l) = (0.0f64, f64::INFINITY);
        for sigma in 1..=top {
            let p = check_w_bounds::<S>(alpha, sigma, n)?;
            u = u.max(p.w_sigma_scaled);
            if let Some(v) = p.off_peak_scaled {
                l = l.min(v);
            }
            nonpositive &= p.max_w <= 0.0;
            points.push(serde_json::to_value(&p)?);
        }
        upper.push(u);
        lower.push(l);
    }
    let mut warnings = Vec::new();
    if lower.iter().any(|v| !v.is_finite()) {
        warnings.push("some length has no off-peak position".into());
    }
    let series = vec![
        Series::assess("-W_Σ Σ^4/α^4", Claim::Upper, ns.clone(), upper),
        Series::assess("min -W_i/(α^2 (1/i - 1/Σ)^2)", Claim::Lower, ns.clone(), lower),
    ];
    let mut r = LemmaReport::new(
        LemmaId::WBounds,
        LemmaGrid {
            ns,
            alphas: vec![alpha],
            sigmas: vec![],
            order: None,
        },
        series,
    );
    if !nonpositive {
        r.pass = false;
        r.warnings.push("some W_i is positive".into());
    }
    r.warnings.extend(warnings);
    r.points = points;
    Ok(r)
}

/// Grids for the whole lemma suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaSuite {
    pub faulhaber_alphas: Vec<f64>,
    pub faulhaber_ns: Vec<usize>,
    pub order: Order,
    pub gamma_alphas: Vec<f64>,
    pub gamma_ns: Vec<usize>,
    pub gamma_sigmas: Vec<SigmaRule>,
    pub w_alpha: f64,
    pub w_ns: Vec<usize>,
    pub precision: PrecisionConfig,
}

impl Default for LemmaSuite {
    fn default() -> Self {
        LemmaSuite {
            faulhaber_alphas: vec![5.0, 7.5, 10.0],
            faulhaber_ns: geometric_grid(16, 4096),
            order: Order::Two,
            gamma_alphas: vec![0.01, 0.1, 0.6],
            gamma_ns: geometric_grid(16, 4096),
            gamma_sigmas: SigmaRule::ALL.to_vec(),
            w_alpha: 0.01,
            w_ns: geometric_grid(64, 4096),
            precision: PrecisionConfig::Extended { mantissa_bits: 106 },
        }
    }
}

impl LemmaSuite {
    pub fn run(&self) -> Result<Vec<LemmaReport>> {
        self.precision.dispatch(SuiteJob(self))?
    }
}

struct SuiteJob<'a>(&'a LemmaSuite);

impl WithReal for SuiteJob<'_> {
    type Output = Result<Vec<LemmaReport>>;
    fn run<S: Real>(self) -> Self::Output {
        let s = self.0;
        let (f, (g, w)) = rayon::join(
            || check_faulhaber::<S>(&s.faulhaber_alphas, &s.faulhaber_ns, s.order),
            || {
                rayon::join(
                    || check_gamma_grid::<S>(&s.gamma_alphas, &s.gamma_ns, &s.gamma_sigmas),
                    || check_w_grid::<S>(s.w_alpha, &s.w_ns),
                )
            },
        );
        Ok(vec![f?, g?, w?])
    }
}
