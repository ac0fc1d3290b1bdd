//! Explicit weights for the PARITY and majority models.

use crate::engine::{
    AttentionLayerParams, EmbeddingSpec, Masking, PeFeature, PeTerm, PositionalEncoding,
    TransformerModel, Vocabulary,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::Real;

use super::formulas::c_const;
use super::layout::CoordinateLayout;
use super::ConstructionParams;

struct Ctx<S> {
    d: usize,
    root_d: S,
    layout: CoordinateLayout,
}

impl<S: Real> Ctx<S> {
    fn new(layout: CoordinateLayout, d: usize) -> Self {
        Ctx {
            d,
            root_d: S::from_usize(d).sqrt(),
            layout,
        }
    }

    fn layer(&self, heads: usize) -> AttentionLayerParams<S> {
        AttentionLayerParams::zeros(self.d, heads)
    }

    /// FFN hidden unit `c` copies coordinate `c` (values are nonnegative).
    fn pass_through(&self, layer: &mut AttentionLayerParams<S>, coords: &[usize]) {
        for &c in coords {
            layer.w1[(c, c)] = S::one();
            layer.w2[(c, c)] = S::one();
        }
    }

    /// Head `r` output coordinate `c` lands on coordinate `c` of `h`.
    fn mix_identity(&self, layer: &mut AttentionLayerParams<S>, head: usize, c: usize) {
        layer.mix[(c, head * self.d + c)] = S::one();
    }

    /// Logits `(-ln n + ln α)(1 - x_i)`; value `10 x_i` into `gamma[r]`.
    fn gamma_head(&self, layer: &mut AttentionLayerParams<S>, r: usize, x: usize, alpha: f64) {
        let l = &self.layout;
        let delta = S::from_f64(alpha).ln();
        let h = &mut layer.heads[r];
        h.query[(0, l.ln)] = -self.root_d.clone();
        h.query[(0, l.one)] = self.root_d.clone() * delta;
        h.key[(0, l.one)] = S::one();
        h.key[(0, x)] = -S::one();
        h.value[(l.gamma[r], x)] = S::from_i64(10);
        self.mix_identity(layer, r, l.gamma[r]);
    }

    /// Logits `γ ln i`; value `i^10` into `Gamma[r]`.
    fn big_gamma_head(&self, layer: &mut AttentionLayerParams<S>, r: usize) {
        let l = &self.layout;
        let h = &mut layer.heads[r];
        h.query[(0, l.gamma[r])] = self.root_d.clone();
        h.key[(0, l.ln)] = S::one();
        h.value[(l.big_gamma[r], l.pow10)] = S::one();
        self.mix_identity(layer, r, l.big_gamma[r]);
    }

    /// Logits `(C/i)(-2Γ + 2|τ_n A_n|) - τ_n (C/i)^2`; value `(-1)^i` into `z[r]`.
    fn z_head(&self, layer: &mut AttentionLayerParams<S>, r: usize, alpha: f64) {
        let l = &self.layout;
        let c = c_const(&S::from_f64(alpha));
        let two = S::from_i64(2);
        let h = &mut layer.heads[r];
        h.query[(0, l.big_gamma[r])] = -(two.clone() * c.clone() * self.root_d.clone());
        h.query[(0, l.tau_abs_a)] = two * c.clone() * self.root_d.clone();
        h.query[(1, l.tau)] = -(c.clone() * c * self.root_d.clone());
        h.key[(0, l.inv)] = S::one();
        h.key[(1, l.inv_sq)] = S::one();
        h.value[(l.z[r], l.even)] = S::one();
        h.value[(l.z[r], l.odd)] = -S::one();
        self.mix_identity(layer, r, l.z[r]);
    }

    fn embedding(&self, alpha: f64) -> EmbeddingSpec<S> {
        let mut one_row = vec![false; self.d];
        one_row[self.layout.bit] = true;
        EmbeddingSpec {
            token_embedding: vec![vec![false; self.d], one_row, vec![false; self.d]],
            positional: PositionalEncoding::Features(self.layout.pe_terms(alpha)),
            length_independent: true,
        }
    }
}

/// Three layers, one head each, for inputs with `1 <= Σ <= c n`.
///
/// Readout: token `0` gets `z`, token `1` gets `-z`, bottom gets 0.
pub fn build_restricted_model<S: Real>(params: &ConstructionParams) -> Result<TransformerModel<S>> {
    params.validate()?;
    let layout = CoordinateLayout::restricted();
    let cx = Ctx::<S>::new(layout.clone(), layout.d);
    let keep = layout.input_coords();

    let mut l1 = cx.layer(1);
    cx.gamma_head(&mut l1, 0, layout.bit, params.alpha);
    cx.pass_through(&mut l1, &keep);
    cx.pass_through(&mut l1, &layout.gamma);

    let mut l2 = cx.layer(1);
    cx.big_gamma_head(&mut l2, 0);
    cx.pass_through(&mut l2, &keep);
    cx.pass_through(&mut l2, &layout.big_gamma);

    let mut l3 = cx.layer(1);
    cx.z_head(&mut l3, 0, params.alpha);
    let z = layout.z[0];
    // z is signed: z = ReLU(z) - ReLU(-z)
    l3.w1[(0, z)] = S::one();
    l3.w1[(1, z)] = -S::one();
    l3.w2[(z, 0)] = S::one();
    l3.w2[(z, 1)] = -S::one();

    let mut readout = Matrix::zeros(3, layout.d);
    readout[(0, z)] = S::one();
    readout[(1, z)] = -S::one();

    let model = TransformerModel {
        d: layout.d,
        vocabulary: Vocabulary::binary(),
        embedding: cx.embedding(params.alpha),
        layers: vec![l1, l2, l3],
        readout,
        masking: Masking::Causal,
    };
    model.validate()?;
    Ok(model)
}

/// Sign vectors over `m` entries with an even number of minus signs, as bit
/// masks (bit `r` set means `-z^r`).
pub fn even_sign_patterns(m: usize) -> Vec<u32> {
    (0..1u32 << m).filter(|p| p.count_ones() % 2 == 0).collect()
}

/// Four layers: split, then `M` heads per layer for `γ`, `Γ`, `z`, and a
/// sign-pattern readout.
pub fn build_full_model<S: Real>(params: &ConstructionParams) -> Result<TransformerModel<S>> {
    let d = CoordinateLayout::full(params.m).d;
    build_full_model_with_dim(params, d)
}

/// As [`build_full_model`] with an explicit model width, which must cover
/// the layout and the readout units.
pub fn build_full_model_with_dim<S: Real>(
    params: &ConstructionParams,
    d: usize,
) -> Result<TransformerModel<S>> {
    params.validate()?;
    let m = params.m;
    if m > 16 {
        return Err(Error::Build(format!("M = {m} needs 2^{} readout units", m - 1)));
    }
    let layout = CoordinateLayout::full(m);
    if d < layout.d {
        return Err(Error::Build(format!(
            "d = {d} cannot hold {} coordinates and {} readout units (need {})",
            layout.coords,
            (1usize << (m - 1)) + 1,
            layout.d
        )));
    }
    let cx = Ctx::<S>::new(layout.clone(), d);
    let keep = layout.input_coords();

    // x^r_i = ReLU(x_i + 1{i = r mod M} - 1) + 1{i = r + 1}
    let mut l1 = cx.layer(1);
    cx.pass_through(&mut l1, &keep);
    for r in 0..m {
        let u = layout.split[r];
        l1.w1[(u, layout.bit)] = S::one();
        l1.w1[(u, layout.residue[r])] = S::one();
        l1.b1[u] = -S::one();
        l1.w2[(u, u)] = S::one();
        l1.w2[(u, layout.start[r])] = S::one();
    }

    let mut l2 = cx.layer(m);
    for r in 0..m {
        cx.gamma_head(&mut l2, r, layout.split[r], params.alpha);
    }
    cx.pass_through(&mut l2, &keep);
    cx.pass_through(&mut l2, &layout.gamma);

    let mut l3 = cx.layer(m);
    for r in 0..m {
        cx.big_gamma_head(&mut l3, r);
    }
    cx.pass_through(&mut l3, &keep);
    cx.pass_through(&mut l3, &layout.big_gamma);

    let mut l4 = cx.layer(m);
    for r in 0..m {
        cx.z_head(&mut l4, r, params.alpha);
    }
    let g = layout.g.expect("full layout");
    let offset = S::ratio(1, 10) - S::from_usize(m);
    let patterns = even_sign_patterns(m);
    for (p, mask) in patterns.iter().enumerate() {
        for r in 0..m {
            l4.w1[(p, layout.z[r])] = if mask >> r & 1 == 1 { -S::one() } else { S::one() };
        }
        l4.b1[p] = offset.clone();
        l4.w2[(g, p)] = S::one();
    }
    let one_unit = patterns.len();
    l4.w1[(one_unit, layout.one)] = S::one();
    l4.w2[(layout.one, one_unit)] = S::one();

    // token 0 iff g > 0.05
    let mut readout = Matrix::zeros(3, d);
    let tenth = S::ratio(1, 10);
    readout[(0, g)] = S::from_i64(2);
    readout[(0, layout.one)] = -tenth.clone();
    readout[(1, g)] = -S::from_i64(2);
    readout[(1, layout.one)] = tenth;

    let model = TransformerModel {
        d,
        vocabulary: Vocabulary::binary(),
        embedding: cx.embedding(params.alpha),
        layers: vec![l1, l2, l3, l4],
        readout,
        masking: Masking::Causal,
    };
    model.validate()?;
    Ok(model)
}

/// Coordinates of the majority model.
pub mod majority_layout {
    pub const BIT: usize = 0;
    pub const MEAN: usize = 1;
    pub const QUARTER_INV: usize = 2;
    pub const SCORE: usize = 3;
    pub const D: usize = 4;
}

/// One layer, one head with uniform attention. The last position holds
/// `s = mean(x) - 1/(4n) - 1/2`; token `1` gets `s`, token `0` gets `-s`.
pub fn build_majority_model<S: Real>() -> TransformerModel<S> {
    use majority_layout::*;
    let mut l = AttentionLayerParams::zeros(D, 1);
    l.heads[0].value[(MEAN, BIT)] = S::one();
    l.mix[(MEAN, MEAN)] = S::one();
    let half = S::ratio(1, 2);
    l.w1[(0, MEAN)] = S::one();
    l.w1[(0, QUARTER_INV)] = -S::one();
    l.b1[0] = -half.clone();
    l.w1[(1, MEAN)] = -S::one();
    l.w1[(1, QUARTER_INV)] = S::one();
    l.b1[1] = half;
    l.w2[(SCORE, 0)] = S::one();
    l.w2[(SCORE, 1)] = -S::one();
    let mut readout = Matrix::zeros(3, D);
    readout[(0, SCORE)] = -S::one();
    readout[(1, SCORE)] = S::one();
    let mut one_row = vec![false; D];
    one_row[BIT] = true;
    TransformerModel {
        d: D,
        vocabulary: Vocabulary::binary(),
        embedding: EmbeddingSpec {
            token_embedding: vec![vec![false; D], one_row, vec![false; D]],
            positional: PositionalEncoding::Features(vec![PeTerm::scaled(
                QUARTER_INV,
                PeFeature::InvPow { k: 1 },
                1,
                4,
            )]),
            length_independent: true,
        },
        layers: vec![l],
        readout,
        masking: Masking::Full,
    }
}
