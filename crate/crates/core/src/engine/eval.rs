//! Compiled evaluation.
//!
//! Weight matrices are converted to sparse rows once. A backward liveness pass
//! then records, for every layer, which heads, hidden units and output
//! coordinates are actually consumed downstream, separately for the last
//! position and for all other positions. Skipped work never feeds the
//! readout, and every computed coordinate goes through the same row kernel in
//! both modes, so pruned and unpruned runs agree bit for bit.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, Vector};
use crate::real::Real;

use super::{
    argmax_or_bottom, AttentionLayerParams, Masking, PositionalEncoding, TokenId,
    TransformerModel,
};

pub(crate) struct CompiledHead<S> {
    query: SparseMatrix<S>,
    key: SparseMatrix<S>,
    value: SparseMatrix<S>,
    /// Rows where both `Q` and `K` have entries; other rows add zero to the dot product.
    qk_rows: Vec<usize>,
}

pub(crate) struct CompiledLayer<S> {
    d: usize,
    heads: Vec<CompiledHead<S>>,
    mix: SparseMatrix<S>,
    w1: SparseMatrix<S>,
    b1: Vector<S>,
    w2: SparseMatrix<S>,
    b2: Vector<S>,
    sqrt_d: S,
}

/// Work needed at one position of one layer.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PositionPlan {
    pub heads: Vec<usize>,
    /// Value rows to compute, per entry of `heads`.
    pub value_rows: Vec<Vec<usize>>,
    /// Coordinates of `h + a` fed to the FFN.
    pub mix_rows: Vec<usize>,
    pub hidden_rows: Vec<usize>,
    pub out_rows: Vec<usize>,
}

impl PositionPlan {
    fn everything(d: usize, heads: usize) -> Self {
        let all: Vec<usize> = (0..d).collect();
        PositionPlan {
            heads: (0..heads).collect(),
            value_rows: vec![all.clone(); heads],
            mix_rows: all.clone(),
            hidden_rows: all.clone(),
            out_rows: all,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.out_rows.is_empty()
    }
}

fn flagged(v: &[bool]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect()
}

fn relu<S: Real>(x: S) -> S {
    if x > S::zero() {
        x
    } else {
        S::zero()
    }
}

impl<S: Real> CompiledLayer<S> {
    pub(crate) fn new(layer: &AttentionLayerParams<S>) -> Self {
        let d = layer.dim();
        let heads = layer
            .heads
            .iter()
            .map(|h| {
                let query = SparseMatrix::from_dense(&h.query);
                let key = SparseMatrix::from_dense(&h.key);
                let qk_rows = (0..d)
                    .filter(|&r| !query.row_is_empty(r) && !key.row_is_empty(r))
                    .collect();
                CompiledHead {
                    query,
                    key,
                    value: SparseMatrix::from_dense(&h.value),
                    qk_rows,
                }
            })
            .collect();
        CompiledLayer {
            d,
            heads,
            mix: SparseMatrix::from_dense(&layer.mix),
            w1: SparseMatrix::from_dense(&layer.w1),
            b1: layer.b1.clone(),
            w2: SparseMatrix::from_dense(&layer.w2),
            b2: layer.b2.clone(),
            sqrt_d: S::from_usize(d).sqrt(),
        }
    }

    fn visible(n: usize, j: usize, masking: Masking) -> usize {
        match masking {
            Masking::Full => n,
            Masking::Causal => j,
        }
    }

    /// Logits of head `k` at 1-based query position `j` over the visible keys.
    pub(crate) fn logits(
        &self,
        k: usize,
        inputs: &[Vector<S>],
        j: usize,
        masking: Masking,
    ) -> Result<Vec<S>> {
        let head = &self.heads[k];
        let q: Vec<S> = head
            .qk_rows
            .iter()
            .map(|&r| head.query.row_dot(r, inputs[j - 1].as_slice()))
            .collect();
        let upto = Self::visible(inputs.len(), j, masking);
        let mut out = Vec::with_capacity(upto);
        for a in &inputs[..upto] {
            let mut acc = S::zero();
            for (&r, qr) in head.qk_rows.iter().zip(&q) {
                acc = acc + head.key.row_dot(r, a.as_slice()) * qr.clone();
            }
            let l = acc / self.sqrt_d.clone();
            if !l.is_finite() {
                return Err(Error::Precision(format!("attention logit, head {k}, position {j}")));
            }
            out.push(l);
        }
        Ok(out)
    }

    pub(crate) fn head_value(
        &self,
        k: usize,
        inputs: &[Vector<S>],
        j: usize,
        masking: Masking,
        rows: Option<&[usize]>,
    ) -> Result<Vector<S>> {
        if j == 0 || j > inputs.len() {
            return Err(Error::Range(format!("position {j} of {}", inputs.len())));
        }
        let logits = self.logits(k, inputs, j, masking)?;
        let weights = super::stable_softmax(&logits)?;
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..self.d).collect();
                &all
            }
        };
        let value = &self.heads[k].value;
        let mut out = Vector::<S>::zeros(self.d);
        for (a, w) in inputs.iter().zip(&weights) {
            for &r in rows {
                out[r] = out[r].clone() + w.clone() * value.row_dot(r, a.as_slice());
            }
        }
        if let Some(r) = out.first_non_finite() {
            return Err(Error::Precision(format!("head {k} value row {r}, position {j}")));
        }
        Ok(out)
    }

    /// `h_j + a_j` on the rows of `plan.mix_rows`.
    pub(crate) fn residual(
        &self,
        inputs: &[Vector<S>],
        j: usize,
        masking: Masking,
        plan: &PositionPlan,
    ) -> Result<Vector<S>> {
        let d = self.d;
        let mut stacked = vec![S::zero(); d * self.heads.len()];
        for (&k, rows) in plan.heads.iter().zip(&plan.value_rows) {
            let v = self.head_value(k, inputs, j, masking, Some(rows))?;
            for &r in rows {
                stacked[k * d + r] = v[r].clone();
            }
        }
        let mut u = Vector::zeros(d);
        for &r in &plan.mix_rows {
            u[r] = self.mix.row_dot(r, &stacked) + inputs[j - 1][r].clone();
        }
        Ok(u)
    }

    pub(crate) fn forward_position(
        &self,
        inputs: &[Vector<S>],
        j: usize,
        masking: Masking,
        plan: &PositionPlan,
    ) -> Result<Vector<S>> {
        let d = self.d;
        let u = self.residual(inputs, j, masking, plan)?;
        let mut hidden = Vector::zeros(d);
        for &r in &plan.hidden_rows {
            hidden[r] = relu(self.w1.row_dot(r, u.as_slice()) + self.b1[r].clone());
        }
        let mut out = Vector::zeros(d);
        for &r in &plan.out_rows {
            out[r] = self.w2.row_dot(r, hidden.as_slice()) + self.b2[r].clone();
            if !out[r].is_finite() {
                return Err(Error::Precision(format!("FFN output row {r}, position {j}")));
            }
        }
        Ok(out)
    }

    pub(crate) fn forward_all(&self, inputs: &[Vector<S>], masking: Masking) -> Result<Vec<Vector<S>>> {
        let plan = PositionPlan::everything(self.d, self.heads.len());
        (1..=inputs.len())
            .map(|j| self.forward_position(inputs, j, masking, &plan))
            .collect()
    }

    fn plan_for(&self, need: &[bool]) -> PositionPlan {
        let d = self.d;
        let out_rows = flagged(need);
        let hidden = self.w2.support_of_rows(out_rows.iter().copied());
        let hidden_rows = flagged(&hidden);
        let mix_rows = flagged(&self.w1.support_of_rows(hidden_rows.iter().copied()));
        let mix_support = self.mix.support_of_rows(mix_rows.iter().copied());
        let mut heads = Vec::new();
        let mut value_rows = Vec::new();
        for k in 0..self.heads.len() {
            let rows: Vec<usize> = (0..d).filter(|&r| mix_support[k * d + r]).collect();
            if !rows.is_empty() {
                heads.push(k);
                value_rows.push(rows);
            }
        }
        PositionPlan {
            heads,
            value_rows,
            mix_rows,
            hidden_rows,
            out_rows,
        }
    }

    fn mark_query_inputs(&self, plan: &PositionPlan, need: &mut [bool]) {
        for &k in &plan.heads {
            let h = &self.heads[k];
            for (c, _) in h.qk_rows.iter().flat_map(|&r| h.query.row_entries(r)) {
                need[c] = true;
            }
        }
    }

    fn mark_key_value_inputs(&self, plans: [&PositionPlan; 2], need: &mut [bool]) {
        for plan in plans {
            for (&k, rows) in plan.heads.iter().zip(&plan.value_rows) {
                let h = &self.heads[k];
                for (c, _) in h.qk_rows.iter().flat_map(|&r| h.key.row_entries(r)) {
                    need[c] = true;
                }
                for (c, _) in rows.iter().flat_map(|&r| h.value.row_entries(r)) {
                    need[c] = true;
                }
            }
        }
    }
}

/// A model compiled for repeated evaluation.
pub struct Evaluator<'m, S: Real> {
    model: &'m TransformerModel<S>,
    layers: Vec<CompiledLayer<S>>,
    readout: SparseMatrix<S>,
    /// Per layer: plan at the last position, plan elsewhere.
    plans: Vec<(PositionPlan, PositionPlan)>,
    pruned: bool,
    pe_cache: Vec<Vector<S>>,
}

impl<'m, S: Real> Evaluator<'m, S> {
    /// Evaluator that skips work not reaching the readout.
    pub fn new(model: &'m TransformerModel<S>) -> Result<Self> {
        Self::build(model, true)
    }

    /// Evaluator that computes every coordinate at every position.
    pub fn unpruned(model: &'m TransformerModel<S>) -> Result<Self> {
        Self::build(model, false)
    }

    fn build(model: &'m TransformerModel<S>, pruned: bool) -> Result<Self> {
        model.validate()?;
        let d = model.d;
        let layers: Vec<CompiledLayer<S>> = model.layers.iter().map(CompiledLayer::new).collect();
        let readout = SparseMatrix::from_dense(&model.readout);
        let plans = if pruned {
            let mut need_last = readout.support_of_rows(0..readout.rows());
            let mut need_other = vec![false; d];
            let mut plans = Vec::with_capacity(layers.len());
            for layer in layers.iter().rev() {
                let last = layer.plan_for(&need_last);
                let other = layer.plan_for(&need_other);
                let mut in_last = vec![false; d];
                let mut in_other = vec![false; d];
                for &r in &last.mix_rows {
                    in_last[r] = true;
                }
                for &r in &other.mix_rows {
                    in_other[r] = true;
                }
                layer.mark_query_inputs(&last, &mut in_last);
                layer.mark_query_inputs(&other, &mut in_other);
                layer.mark_key_value_inputs([&last, &other], &mut in_last);
                layer.mark_key_value_inputs([&last, &other], &mut in_other);
                plans.push((last, other));
                need_last = in_last;
                need_other = in_other;
            }
            plans.reverse();
            plans
        } else {
            layers
                .iter()
                .map(|l| {
                    let p = PositionPlan::everything(d, l.heads.len());
                    (p.clone(), p)
                })
                .collect()
        };
        Ok(Evaluator {
            model,
            layers,
            readout,
            plans,
            pruned,
            pe_cache: Vec::new(),
        })
    }

    /// Precomputes positional rows `1..=n_max` when the encoding is
    /// length-independent.
    pub fn with_position_cache(mut self, n_max: usize) -> Result<Self> {
        let pe = &self.model.embedding.positional;
        if matches!(pe, PositionalEncoding::Features(_)) && !pe.depends_on_length() {
            self.pe_cache = (1..=n_max)
                .map(|i| pe.at(i, n_max, self.model.d))
                .collect::<Result<_>>()?;
        }
        Ok(self)
    }

    pub fn model(&self) -> &TransformerModel<S> {
        self.model
    }

    pub fn is_pruned(&self) -> bool {
        self.pruned
    }

    /// `(last position, other positions)` plans per layer.
    pub fn plans(&self) -> &[(PositionPlan, PositionPlan)] {
        &self.plans
    }

    fn pe_row(&self, i: usize, n: usize) -> Result<Cow<'_, Vector<S>>> {
        if let Some(v) = self.pe_cache.get(i - 1) {
            return Ok(Cow::Borrowed(v));
        }
        self.model.embedding.positional.at(i, n, self.model.d).map(Cow::Owned)
    }

    pub fn embed(&self, tokens: &[TokenId]) -> Result<Vec<Vector<S>>> {
        self.model.check_tokens(tokens)?;
        let n = tokens.len();
        tokens
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut v = self.pe_row(i + 1, n)?.into_owned();
                self.model.embedding.add_token(&mut v, t);
                if let Some(c) = v.first_non_finite() {
                    return Err(Error::Precision(format!("embedding coordinate {c} at position {}", i + 1)));
                }
                Ok(v)
            })
            .collect()
    }

    fn run_layer(&self, l: usize, inputs: &[Vector<S>]) -> Result<Vec<Vector<S>>> {
        let n = inputs.len();
        let (last, other) = &self.plans[l];
        let layer = &self.layers[l];
        (1..=n)
            .map(|j| {
                let plan = if j == n { last } else { other };
                if plan.is_idle() {
                    Ok(Vector::zeros(self.model.d))
                } else {
                    layer.forward_position(inputs, j, self.model.masking, plan)
                }
            })
            .collect()
    }

    /// Output state `b_n` of the last layer at the last position. With pruning
    /// only coordinates read by the readout are meaningful.
    pub fn last_state(&self, tokens: &[TokenId]) -> Result<Vector<S>> {
        let mut xs = self.embed(tokens)?;
        for l in 0..self.layers.len() {
            xs = self.run_layer(l, &xs)?;
        }
        Ok(xs.pop().expect("non-empty input"))
    }

    /// Embedding followed by the output of every layer, all positions, all
    /// coordinates.
    pub fn states(&self, tokens: &[TokenId]) -> Result<Vec<Vec<Vector<S>>>> {
        let mut out = vec![self.embed(tokens)?];
        for layer in &self.layers {
            let next = layer.forward_all(out.last().expect("embedding"), self.model.masking)?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn readout_logits(&self, tokens: &[TokenId]) -> Result<Vec<S>> {
        let b = self.last_state(tokens)?;
        Ok((0..self.readout.rows())
            .map(|t| self.readout.row_dot(t, b.as_slice()))
            .collect())
    }

    pub fn forward(&self, tokens: &[TokenId]) -> Result<TokenId> {
        let logits = self.readout_logits(tokens)?;
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::Precision("readout logits".into()));
        }
        Ok(argmax_or_bottom(&logits, self.model.vocabulary.bottom()))
    }

    pub fn forward_bits(&self, x: &[bool]) -> Result<TokenId> {
        self.forward(&self.model.vocabulary.encode_bits(x))
    }

    /// Attention logits of `head` in layer `layer` (0-based) at position `j`,
    /// given that layer's inputs.
    pub fn attention_logits(&self, layer: usize, head: usize, inputs: &[Vector<S>], j: usize) -> Result<Vec<S>> {
        self.layers[layer].logits(head, inputs, j, self.model.masking)
    }

    /// `h_j + a_j` of layer `layer` (0-based), every coordinate.
    pub fn residual_at(&self, layer: usize, inputs: &[Vector<S>], j: usize) -> Result<Vector<S>> {
        let l = &self.layers[layer];
        let plan = PositionPlan::everything(l.d, l.heads.len());
        l.residual(inputs, j, self.model.masking, &plan)
    }
}
