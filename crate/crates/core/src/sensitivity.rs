//! Average sensitivity of Boolean functions and the pieces of the
//! sensitivity lower bound that can be computed: sensitive edges, hyperplane
//! edge cuts, and the affine form of one-layer one-head attention.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits;
use crate::engine::random::{random_model, RandomModelSpec};
use crate::engine::{Evaluator, Masking, TransformerModel};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::real::Real;

/// Largest arity enumerated by default.
pub const DEFAULT_N_CAP: usize = 20;

/// `f: {0,1}^n -> {0,1}` as a truth table in enumeration order (`x_1` most
/// significant).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanFunction {
    n: usize,
    table: Vec<bool>,
}

impl BooleanFunction {
    pub fn new(n: usize, table: Vec<bool>) -> Result<Self> {
        Self::check_arity(n, DEFAULT_N_CAP)?;
        if table.len() != 1usize << n {
            return Err(Error::InvalidInput(format!(
                "truth table of length {} for arity {n}",
                table.len()
            )));
        }
        Ok(BooleanFunction { n, table })
    }

    fn check_arity(n: usize, cap: usize) -> Result<()> {
        if n > cap {
            return Err(Error::Range(format!("arity {n} exceeds the enumeration cap {cap}")));
        }
        Ok(())
    }

    pub fn from_fn(n: usize, f: impl Fn(&[bool]) -> bool) -> Result<Self> {
        Self::check_arity(n, DEFAULT_N_CAP)?;
        let table = (0..1u64 << n).map(|k| f(&bits::from_index(n, k))).collect();
        Ok(BooleanFunction { n, table })
    }

    pub fn parity(n: usize) -> Result<Self> {
        Self::from_fn(n, bits::parity)
    }

    pub fn majority(n: usize) -> Result<Self> {
        Self::from_fn(n, bits::majority)
    }

    pub fn constant(n: usize, value: bool) -> Result<Self> {
        Self::new(n, vec![value; 1 << n])
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        Self::check_arity(n, DEFAULT_N_CAP)?;
        Ok(BooleanFunction {
            n,
            table: (0..1usize << n).map(|_| rng.random_bool(0.5)).collect(),
        })
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    pub fn value(&self, x: &[bool]) -> bool {
        self.table[bits::to_index(x) as usize]
    }

    /// `"n:hex"`; entry `k` is bit `k % 8` of byte `k / 8`.
    pub fn to_hex(&self) -> String {
        let mut bytes = vec![0u8; self.table.len().div_ceil(8)];
        for (k, &b) in self.table.iter().enumerate() {
            if b {
                bytes[k / 8] |= 1 << (k % 8);
            }
        }
        format!("{}:{}", self.n, hex::encode(bytes))
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("`{s}` is not an `n:hex` truth table"));
        let (n, h) = s.split_once(':').ok_or_else(bad)?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        Self::check_arity(n, DEFAULT_N_CAP)?;
        let bytes = hex::decode(h.trim()).map_err(|_| bad())?;
        let len = 1usize << n;
        if bytes.len() != len.div_ceil(8) {
            return Err(bad());
        }
        let table: Vec<bool> = (0..len).map(|k| bytes[k / 8] >> (k % 8) & 1 == 1).collect();
        if (len..bytes.len() * 8).any(|k| bytes[k / 8] >> (k % 8) & 1 == 1) {
            return Err(Error::InvalidInput(format!("`{s}` has bits past entry {len}")));
        }
        Ok(BooleanFunction { n, table })
    }
}

/// Truth table of `model` on all inputs of length `n`, under `masking`.
pub fn truth_table<S: Real>(model: &TransformerModel<S>, n: usize, masking: Masking) -> Result<BooleanFunction> {
    truth_table_capped(model, n, masking, DEFAULT_N_CAP)
}

pub fn truth_table_capped<S: Real>(
    model: &TransformerModel<S>,
    n: usize,
    masking: Masking,
    cap: usize,
) -> Result<BooleanFunction> {
    BooleanFunction::check_arity(n, cap)?;
    if n == 0 {
        return Err(Error::InvalidInput("arity must be positive".into()));
    }
    let owned;
    let model = if model.masking == masking {
        model
    } else {
        owned = TransformerModel {
            masking,
            ..model.clone()
        };
        &owned
    };
    let ev = Evaluator::new(model)?.with_position_cache(n)?;
    let out: Vec<Result<bool>> = (0..1u64 << n)
        .into_par_iter()
        .map(|k| {
            let x = bits::from_index(n, k);
            let t = ev.forward_bits(&x)?;
            model.vocabulary.as_bit(t).ok_or_else(|| Error::NotBoolean {
                witness: bits::format(&x),
                token: model.vocabulary.symbol(t).to_string(),
            })
        })
        .collect();
    let table = out.into_iter().collect::<Result<Vec<bool>>>()?;
    Ok(BooleanFunction { n, table })
}

/// Number of positions whose flip changes `f(x)`.
pub fn sensitivity_at(f: &BooleanFunction, x: &[bool]) -> Result<usize> {
    if x.len() != f.n {
        return Err(Error::Dimension(format!("input of length {} for arity {}", x.len(), f.n)));
    }
    let k = bits::to_index(x) as usize;
    Ok(flips(f, k))
}

fn flips(f: &BooleanFunction, k: usize) -> usize {
    (0..f.n).filter(|b| f.table[k] != f.table[k ^ (1 << b)]).count()
}

/// `Σ_x s_x(f) / 2^n`, exact.
pub fn average_sensitivity(f: &BooleanFunction) -> Ratio<u64> {
    let total: u64 = (0..f.table.len()).into_par_iter().map(|k| flips(f, k) as u64).sum();
    Ratio::new(total, 1u64 << f.n)
}

/// Hypercube edges whose endpoints get different values.
pub fn sensitive_edge_count(f: &BooleanFunction) -> u64 {
    (0..f.table.len())
        .into_par_iter()
        .map(|k| (0..f.n).filter(|&b| k >> b & 1 == 0 && f.table[k] != f.table[k | 1 << b]).count() as u64)
        .sum()
}

/// `as(maj_n) = 2 C(n, (n-1)/2) ((n+1)/2) / 2^n` for odd `n`.
pub fn majority_average_sensitivity(n: usize) -> Result<Ratio<u64>> {
    if n.is_multiple_of(2) || n > 61 {
        return Err(Error::InvalidInput(format!("closed form needs odd n <= 61, got {n}")));
    }
    let k = (n - 1) / 2;
    let mut binom: u128 = 1;
    for j in 0..k {
        binom = binom * (n - j) as u128 / (j + 1) as u128;
    }
    let r = Ratio::new(2 * binom * (k as u128 + 1), 1u128 << n);
    Ok(Ratio::new_raw(*r.numer() as u64, *r.denom() as u64))
}

pub fn ratio_to_f64(r: &Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `{x : <w, x> > b}` and its complement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Hyperplane {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidInput("hyperplane normal is zero".into()));
        }
        if normal.iter().chain([&offset]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("hyperplane has a non-finite entry".into()));
        }
        Ok(Hyperplane { normal, offset })
    }

    pub fn axis(n: usize, k: usize, offset: f64) -> Result<Self> {
        if k >= n {
            return Err(Error::Range(format!("axis {k} in dimension {n}")));
        }
        let mut w = vec![0.0; n];
        w[k] = 1.0;
        Self::new(w, offset)
    }

    /// Normal uniform on the sphere, offset `<w, (1/2, ..., 1/2)> + U[-1/2, 1/2]`,
    /// so the plane passes near the cube's center.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        loop {
            let w: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                let w: Vec<f64> = w.iter().map(|v| v / norm).collect();
                let center = w.iter().sum::<f64>() / 2.0;
                let b = center + rng.random_range(-0.5..=0.5);
                return Hyperplane { normal: w, offset: b };
            }
        }
    }

    pub fn above(&self, x: &[bool]) -> bool {
        let s: f64 = self.normal.iter().zip(x).filter(|(_, &b)| b).map(|(w, _)| w).sum();
        s > self.offset
    }
}

/// Edges of `{0,1}^n` with endpoints on different sides. A point on the plane
/// counts as below it.
pub fn cut_edges(h: &Hyperplane, n: usize) -> Result<u64> {
    BooleanFunction::check_arity(n, DEFAULT_N_CAP)?;
    if h.normal.len() != n {
        return Err(Error::Dimension(format!("normal of length {} in dimension {n}", h.normal.len())));
    }
    let f = BooleanFunction::from_fn(n, |x| h.above(x))?;
    Ok(sensitive_edge_count(&f))
}

/// `coeffs · x + constant`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineForm<S> {
    pub coeffs: Vec<S>,
    pub constant: S,
}

impl<S: Real> AffineForm<S> {
    pub fn eval(&self, x: &[bool]) -> S {
        let mut acc = self.constant.clone();
        for (c, &b) in self.coeffs.iter().zip(x) {
            if b {
                acc = acc + c.clone();
            }
        }
        acc
    }
}

/// `l_0, ..., l_d` over the first `n - 1` bits with the last one fixed, such
/// that `h_n + a_n = (l_1(x), ..., l_d(x)) / l_0(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineDecomposition<S> {
    pub n: usize,
    pub last_bit: bool,
    /// Common shift subtracted from every attention logit.
    pub shift: S,
    /// `θ^0_i`, `θ^1_i` for `i < n`, then `θ_n`.
    pub theta: Vec<(S, S)>,
    pub forms: Vec<AffineForm<S>>,
}

impl<S: Real> AffineDecomposition<S> {
    pub fn denominator(&self) -> &AffineForm<S> {
        &self.forms[0]
    }

    pub fn reconstruct(&self, x: &[bool]) -> Result<Vector<S>> {
        if x.len() + 1 != self.n {
            return Err(Error::Dimension(format!("{} free bits for n = {}", x.len(), self.n)));
        }
        let l0 = self.forms[0].eval(x);
        Ok(Vector::from(
            self.forms[1..].iter().map(|l| l.eval(x) / l0.clone()).collect::<Vec<_>>(),
        ))
    }
}

/// Affine decomposition of a one-layer one-head model at the last position.
pub fn affine_decompose<S: Real>(
    model: &TransformerModel<S>,
    n: usize,
    last_bit: bool,
) -> Result<AffineDecomposition<S>> {
    if model.layers.len() != 1 || model.layers[0].heads.len() != 1 {
        return Err(Error::Dimension(format!(
            "affine decomposition needs 1 layer with 1 head, got heads per layer {:?}",
            model.heads_per_layer()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput("affine decomposition needs n >= 2".into()));
    }
    model.validate()?;
    let d = model.d;
    let layer = &model.layers[0];
    let head = &layer.heads[0];
    let voc = &model.vocabulary;
    let emb = |b: bool, i: usize| model.embedding.embed(voc.bit(b), i, n, d);
    let a_n = emb(last_bit, n)?;
    let q = head.query.matvec(&a_n);
    let root_d = S::from_usize(d).sqrt();
    let logit = |a: &Vector<S>| -> Result<S> { Ok(head.key.matvec(a).dot(&q) / root_d.clone()) };

    // per position: (logit, value) for bit 0 and bit 1; the last is fixed
    let mut raw = Vec::with_capacity(n);
    for i in 1..n {
        let (a0, a1) = (emb(false, i)?, emb(true, i)?);
        raw.push([(logit(&a0)?, head.value.matvec(&a0)), (logit(&a1)?, head.value.matvec(&a1))]);
    }
    let last = (logit(&a_n)?, head.value.matvec(&a_n));
    let shift = raw
        .iter()
        .flat_map(|p| [p[0].0.clone(), p[1].0.clone()])
        .chain([last.0.clone()])
        .reduce(S::max_of)
        .expect("n >= 2");
    if !shift.is_finite() {
        return Err(Error::Precision("attention logits".into()));
    }
    let th = |l: &S| (l.clone() - shift.clone()).exp();

    // head output numerators: l'_k = Σ θ ρ_k, then h + a = W_O γ + a_n
    let theta: Vec<(S, S)> = raw
        .iter()
        .map(|p| (th(&p[0].0), th(&p[1].0)))
        .chain([(th(&last.0), th(&last.0))])
        .collect();
    let numer = |k: usize| -> AffineForm<S> {
        let mut coeffs = Vec::with_capacity(n - 1);
        let mut constant = theta[n - 1].0.clone() * last.1[k].clone();
        for (i, p) in raw.iter().enumerate() {
            let c0 = theta[i].0.clone() * p[0].1[k].clone();
            let c1 = theta[i].1.clone() * p[1].1[k].clone();
            coeffs.push(c1 - c0.clone());
            constant = constant + c0;
        }
        AffineForm { coeffs, constant }
    };
    let mut l0 = AffineForm {
        coeffs: Vec::with_capacity(n - 1),
        constant: theta[n - 1].0.clone(),
    };
    for t in &theta[..n - 1] {
        l0.coeffs.push(t.1.clone() - t.0.clone());
        l0.constant = l0.constant.clone() + t.0.clone();
    }
    let head_forms: Vec<AffineForm<S>> = (0..d).map(numer).collect();
    let mut forms = vec![l0.clone()];
    for r in 0..d {
        let mut coeffs: Vec<S> = l0.coeffs.iter().map(|c| c.clone() * a_n[r].clone()).collect();
        let mut constant = l0.constant.clone() * a_n[r].clone();
        for (m, hf) in head_forms.iter().enumerate() {
            let w = layer.mix[(r, m)].clone();
            if w.is_zero() {
                continue;
            }
            for (c, h) in coeffs.iter_mut().zip(&hf.coeffs) {
                *c = c.clone() + w.clone() * h.clone();
            }
            constant = constant + w * hf.constant.clone();
        }
        forms.push(AffineForm { coeffs, constant });
    }
    Ok(AffineDecomposition {
        n,
        last_bit,
        shift,
        theta,
        forms,
    })
}

/// Largest relative deviation, over all `2^{n-1}` free inputs, between the
/// decomposition and the engine's `h_n + a_n`, normalized by the largest
/// engine coordinate.
pub fn affine_reconstruction_error<S: Real>(model: &TransformerModel<S>, n: usize, last_bit: bool) -> Result<f64> {
    let dec = affine_decompose(model, n, last_bit)?;
    let ev = Evaluator::unpruned(model)?;
    let mut worst = 0.0f64;
    for k in 0..1u64 << (n - 1) {
        let x = bits::from_index(n - 1, k);
        if dec.denominator().eval(&x) <= S::zero() {
            return Err(Error::InvalidInput(format!("l_0 <= 0 at {}", bits::format(&x))));
        }
        let mut full = x.clone();
        full.push(last_bit);
        let inputs = ev.embed(&model.vocabulary.encode_bits(&full))?;
        let engine = ev.residual_at(0, &inputs, n)?;
        let rec = dec.reconstruct(&x)?;
        let scale = engine.max_abs().to_f64().max(f64::MIN_POSITIVE);
        for r in 0..model.d {
            let e = (rec[r].clone() - engine[r].clone()).abs().to_f64() / scale;
            worst = worst.max(e);
        }
    }
    Ok(worst)
}

/// Settings of the random-model sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub trials: usize,
    pub ns: Vec<usize>,
    pub d: usize,
    pub scales: Vec<f64>,
    pub seed: u64,
    /// Ratios above this are listed for inspection.
    pub flag_above: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            trials: 200,
            ns: (6..=12).collect(),
            d: 4,
            scales: vec![1.0, 10.0, 100.0],
            seed: 0,
            flag_above: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scale: f64,
    pub n: usize,
    pub evaluated: usize,
    /// Draws whose table contained the bottom token.
    pub skipped: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFlag {
    pub scale: f64,
    pub trial: usize,
    pub n: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    /// Entries are `scale * U[-1, 1]`, token embeddings fair bits, one
    /// positional row per position, full attention.
    pub distribution: String,
    pub rows: Vec<SweepRow>,
    pub max_ratio: f64,
    pub flagged: Vec<SweepFlag>,
}

/// `max as(f_n)/sqrt(n)` over random one-layer one-head models.
pub fn sensitivity_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.trials == 0 || cfg.ns.is_empty() || cfg.scales.is_empty() || cfg.d == 0 {
        return Err(Error::InvalidInput("empty sweep".into()));
    }
    let n_max = *cfg.ns.iter().max().expect("non-empty");
    BooleanFunction::check_arity(n_max, DEFAULT_N_CAP)?;
    let mut rows = Vec::new();
    let mut flagged = Vec::new();
    for (si, &scale) in cfg.scales.iter().enumerate() {
        let spec = RandomModelSpec::one_layer(cfg.d, n_max, scale);
        // per trial: ratio per n, None when the model emits bottom
        let per_trial: Vec<Vec<Option<f64>>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(((si as u64) << 32) | t as u64);
                let model = random_model::<f64, _>(&spec, &mut rng);
                cfg.ns
                    .iter()
                    .map(|&n| match truth_table(&model, n, Masking::Full) {
                        Ok(f) => Ok(Some(ratio_to_f64(&average_sensitivity(&f)) / (n as f64).sqrt())),
                        Err(Error::NotBoolean { .. }) => Ok(None),
                        Err(e) => Err(e),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        for (k, &n) in cfg.ns.iter().enumerate() {
            let vals: Vec<(usize, f64)> = per_trial
                .iter()
                .enumerate()
                .filter_map(|(t, r)| r[k].map(|v| (t, v)))
                .collect();
            for &(t, v) in &vals {
                if v > cfg.flag_above {
                    flagged.push(SweepFlag { scale, trial: t, n, ratio: v });
                }
            }
            let max_ratio = vals.iter().map(|v| v.1).fold(0.0, f64::max);
            let mean_ratio = if vals.is_empty() {
                0.0
            } else {
                vals.iter().map(|v| v.1).sum::<f64>() / vals.len() as f64
            };
            rows.push(SweepRow {
                scale,
                n,
                evaluated: vals.len(),
                skipped: cfg.trials - vals.len(),
                max_ratio,
                mean_ratio,
            });
        }
    }
    let max_ratio = rows.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    Ok(SweepReport {
        config: cfg.clone(),
        distribution: "entries scale*U[-1,1]; token embeddings fair bits; positional table; full attention".into(),
        rows,
        max_ratio,
        flagged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutRow {
    pub n: usize,
    pub max_cut: u64,
    /// `max_cut / (sqrt(n) 2^n)`.
    pub ratio: f64,
}

/// Largest cut over `samples` random hyperplanes per `n`.
pub fn cut_sampling(ns: &[usize], samples: usize, seed: u64) -> Result<Vec<CutRow>> {
    ns.iter()
        .map(|&n| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n as u64);
            let planes: Vec<Hyperplane> = (0..samples).map(|_| Hyperplane::random(n, &mut rng)).collect();
            let cuts = planes
                .par_iter()
                .map(|h| cut_edges(h, n))
                .collect::<Result<Vec<u64>>>()?;
            let max_cut = cuts.into_iter().max().unwrap_or(0);
            Ok(CutRow {
                n,
                max_cut,
                ratio: max_cut as f64 / ((n as f64).sqrt() * (1u64 << n) as f64),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parity::build_majority_model;
    use proptest::prelude::*;

    fn r(a: u64, b: u64) -> Ratio<u64> {
        Ratio::new(a, b)
    }

    #[test]
    fn parity_and_constants() {
        for n in 1..=12 {
            let p = BooleanFunction::parity(n).unwrap();
            assert_eq!(average_sensitivity(&p), r(n as u64, 1));
            assert_eq!(sensitive_edge_count(&p), n as u64 * (1 << (n - 1)));
            let c = BooleanFunction::constant(n, true).unwrap();
            assert_eq!(average_sensitivity(&c), r(0, 1));
            assert_eq!(sensitive_edge_count(&c), 0);
        }
        let p3 = BooleanFunction::parity(3).unwrap();
        for k in 0..8 {
            assert_eq!(sensitivity_at(&p3, &bits::from_index(3, k)).unwrap(), 3);
        }
    }

    #[test]
    fn majority_of_three() {
        let m = BooleanFunction::majority(3).unwrap();
        assert_eq!(m.table(), &[false, false, false, true, false, true, true, true]);
        assert_eq!(sensitivity_at(&m, &bits::parse("001").unwrap()).unwrap(), 2);
        assert_eq!(average_sensitivity(&m), r(3, 2));
        assert_eq!(sensitive_edge_count(&m), 6);
    }

    #[test]
    fn majority_closed_form_matches_enumeration() {
        for n in (1..=15).step_by(2) {
            let m = BooleanFunction::majority(n).unwrap();
            assert_eq!(average_sensitivity(&m), majority_average_sensitivity(n).unwrap(), "n = {n}");
        }
    }

    #[test]
    fn hex_round_trip() {
        let m = BooleanFunction::majority(3).unwrap();
        assert_eq!(m.to_hex(), "3:e8");
        assert_eq!(BooleanFunction::from_hex("3:e8").unwrap(), m);
        let p = BooleanFunction::parity(1).unwrap();
        assert_eq!(p.to_hex(), "1:02");
        assert!(BooleanFunction::from_hex("1:06").is_err());
        assert!(BooleanFunction::from_hex("3:e").is_err());
        assert!(BooleanFunction::from_hex("21:00").is_err());
    }

    #[test]
    fn arity_cap() {
        assert!(BooleanFunction::parity(21).is_err());
        assert!(cut_edges(&Hyperplane::axis(21, 0, 0.5).unwrap(), 21).is_err());
    }

    #[test]
    fn axis_cuts() {
        assert_eq!(cut_edges(&Hyperplane::axis(3, 0, 0.5).unwrap(), 3).unwrap(), 4);
        assert_eq!(cut_edges(&Hyperplane::axis(3, 0, 2.0).unwrap(), 3).unwrap(), 0);
        assert!(Hyperplane::new(vec![0.0; 3], 0.5).is_err());
        for n in 1..=10 {
            for k in 0..n {
                let h = Hyperplane::axis(n, k, 0.5).unwrap();
                assert_eq!(cut_edges(&h, n).unwrap(), 1 << (n - 1));
            }
        }
    }

    #[test]
    fn points_on_the_plane_count_as_below() {
        // x_1 + x_2 > 1: only 11 is above
        let h = Hyperplane::new(vec![1.0, 1.0], 1.0).unwrap();
        assert!(!h.above(&[true, false]));
        assert!(h.above(&[true, true]));
        assert_eq!(cut_edges(&h, 2).unwrap(), 2);
    }

    #[test]
    fn majority_model_tables() {
        let m = build_majority_model::<f64>();
        let f = truth_table(&m, 3, Masking::Full).unwrap();
        assert_eq!(f, BooleanFunction::majority(3).unwrap());
    }

    #[test]
    fn zero_readout_is_not_boolean() {
        let mut m = build_majority_model::<f64>();
        m.readout = crate::linalg::Matrix::zeros(3, m.d);
        match truth_table(&m, 4, Masking::Full) {
            Err(Error::NotBoolean { witness, token }) => {
                assert_eq!(witness, "0000");
                assert_eq!(token, "⊥");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_query_gives_uniform_denominator() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = random_model::<f64, _>(&RandomModelSpec::one_layer(4, 8, 1.0), &mut rng);
        m.layers[0].heads[0].query = crate::linalg::Matrix::zeros(4, 4);
        for last in [false, true] {
            let dec = affine_decompose(&m, 8, last).unwrap();
            assert_eq!(dec.denominator().constant, 8.0);
            assert!(dec.denominator().coeffs.iter().all(|c| *c == 0.0));
        }
    }

    #[test]
    fn affine_reconstruction_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let m = random_model::<f64, _>(&RandomModelSpec::one_layer(4, 8, 3.0), &mut rng);
            for last in [false, true] {
                let e = affine_reconstruction_error(&m, 8, last).unwrap();
                assert!(e <= 1e-10, "{e}");
            }
        }
    }

    #[test]
    fn affine_rejects_deeper_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut spec = RandomModelSpec::one_layer(3, 4, 1.0);
        spec.heads = 2;
        let m = random_model::<f64, _>(&spec, &mut rng);
        assert!(affine_decompose(&m, 4, true).is_err());
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = SweepConfig {
            trials: 6,
            ns: vec![4, 5],
            ..SweepConfig::default()
        };
        let a = sensitivity_sweep(&cfg).unwrap();
        let b = sensitivity_sweep(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 6);
        assert!(a.rows.iter().all(|r| r.evaluated + r.skipped == 6));
    }

    proptest! {
        #[test]
        fn edge_identity(n in 1usize..=10, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = BooleanFunction::random(n, &mut rng).unwrap();
            let a = average_sensitivity(&f);
            prop_assert_eq!(a, Ratio::new(2 * sensitive_edge_count(&f), 1 << n));
            prop_assert!(a <= Ratio::from_integer(n as u64));
            prop_assert_eq!(BooleanFunction::from_hex(&f.to_hex()).unwrap(), f);
        }
    }
}
