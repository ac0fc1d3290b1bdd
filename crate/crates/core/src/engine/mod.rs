//! Softmax-attention transformer semantics.
//!
//! A model maps a token sequence to a single token. Every layer runs `H`
//! attention heads, mixes them with `W_O`, adds the residual and applies a
//! two-matrix ReLU feed-forward block whose output replaces the state:
//!
//! ```text
//! h_j  = W_O [head_1(j); ...; head_H(j)]
//! b_j  = W2 ReLU(W1 (h_j + a_j) + b1) + b2
//! ```
//!
//! The output token is the argmax of `W b_n` at the last position; an exact
//! tie yields the model's bottom token.

mod eval;
pub mod io;
pub mod random;
pub mod reference;
mod softmax;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::parity::formulas;
use crate::real::Real;

pub use eval::{Evaluator, PositionPlan};
pub use softmax::stable_softmax;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Masking {
    Full,
    Causal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenId(pub usize);

/// Token set. Always contains `0`, `1` and a bottom symbol returned on ties.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    symbols: Vec<String>,
    bottom: TokenId,
}

pub const BOTTOM_SYMBOL: &str = "⊥";

impl Vocabulary {
    pub fn new(symbols: Vec<String>, bottom: TokenId) -> Result<Self> {
        let v = Vocabulary { symbols, bottom };
        v.validate()?;
        Ok(v)
    }

    /// `["0", "1", "⊥"]`.
    pub fn binary() -> Self {
        Vocabulary {
            symbols: vec!["0".into(), "1".into(), BOTTOM_SYMBOL.into()],
            bottom: TokenId(2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bottom.0 >= self.symbols.len() {
            return Err(Error::InvalidInput("bottom token outside vocabulary".into()));
        }
        for s in ["0", "1"] {
            if self.lookup(s).is_none() {
                return Err(Error::InvalidInput(format!("vocabulary lacks `{s}`")));
            }
        }
        let mut sorted = self.symbols.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.symbols.len() {
            return Err(Error::InvalidInput("duplicate vocabulary symbols".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, t: TokenId) -> &str {
        &self.symbols[t.0]
    }

    pub fn lookup(&self, s: &str) -> Option<TokenId> {
        self.symbols.iter().position(|x| x == s).map(TokenId)
    }

    pub fn bottom(&self) -> TokenId {
        self.bottom
    }

    pub fn bit(&self, b: bool) -> TokenId {
        self.lookup(if b { "1" } else { "0" })
            .expect("validated vocabulary has both bits")
    }

    pub fn encode_bits(&self, x: &[bool]) -> Vec<TokenId> {
        let (zero, one) = (self.bit(false), self.bit(true));
        x.iter().map(|&b| if b { one } else { zero }).collect()
    }

    /// `Some(bit)` for the tokens `0`/`1`, `None` for anything else.
    pub fn as_bit(&self, t: TokenId) -> Option<bool> {
        match self.symbol(t) {
            "0" => Some(false),
            "1" => Some(true),
            _ => None,
        }
    }
}

/// A scalar function of the position `i` (and, for `OverLength`, the length).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PeFeature {
    One,
    /// `ln i`
    Ln,
    /// `i^k`
    Pow { k: u32 },
    /// `1 / i^k`
    InvPow { k: u32 },
    /// `tau_i`
    Tau,
    /// `|tau_i A_i|` for the given alpha
    TauAbsA { alpha: f64 },
    /// `1{i = r mod modulus}`
    Residue { modulus: usize, r: usize },
    /// `1{i = pos}`
    Start { pos: usize },
    /// `1{i even}`
    Even,
    /// `1{i odd}`
    Odd,
    /// `i / n`; the only length-dependent feature
    OverLength,
}

impl PeFeature {
    pub fn is_length_dependent(&self) -> bool {
        matches!(self, PeFeature::OverLength)
    }

    pub fn eval<S: Real>(&self, i: usize, n: usize) -> S {
        let fi = S::from_usize(i);
        let ind = |b: bool| if b { S::one() } else { S::zero() };
        match self {
            PeFeature::One => S::one(),
            PeFeature::Ln => fi.ln(),
            PeFeature::Pow { k } => fi.powi(*k),
            PeFeature::InvPow { k } => S::one() / fi.powi(*k),
            PeFeature::Tau => formulas::tau(i),
            PeFeature::TauAbsA { alpha } => {
                let t: S = formulas::tau(i);
                (t * formulas::a_n(&S::from_f64(*alpha), i)).abs()
            }
            PeFeature::Residue { modulus, r } => ind(i % modulus == *r),
            PeFeature::Start { pos } => ind(i == *pos),
            PeFeature::Even => ind(i.is_multiple_of(2)),
            PeFeature::Odd => ind(i % 2 == 1),
            PeFeature::OverLength => fi / S::from_usize(n),
        }
    }
}

/// `coef * feature(i)` added to coordinate `coord`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeTerm {
    pub coord: usize,
    pub feature: PeFeature,
    /// Rational coefficient `num / den`.
    pub num: i64,
    pub den: i64,
}

impl PeTerm {
    pub fn new(coord: usize, feature: PeFeature) -> Self {
        PeTerm {
            coord,
            feature,
            num: 1,
            den: 1,
        }
    }

    pub fn scaled(coord: usize, feature: PeFeature, num: i64, den: i64) -> Self {
        PeTerm {
            coord,
            feature,
            num,
            den,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PositionalEncoding<S> {
    /// Explicit rows for positions `1..=len`.
    Table(Vec<Vector<S>>),
    /// Closed-form features; unlisted coordinates are zero.
    Features(Vec<PeTerm>),
}

impl<S: Real> PositionalEncoding<S> {
    pub fn depends_on_length(&self) -> bool {
        match self {
            PositionalEncoding::Table(_) => false,
            PositionalEncoding::Features(ts) => ts.iter().any(|t| t.feature.is_length_dependent()),
        }
    }

    /// PE at 1-based position `i` of a length-`n` input.
    pub fn at(&self, i: usize, n: usize, d: usize) -> Result<Vector<S>> {
        match self {
            PositionalEncoding::Table(rows) => rows.get(i - 1).cloned().ok_or_else(|| {
                Error::Range(format!(
                    "position {i} beyond the {}-row encoding table",
                    rows.len()
                ))
            }),
            PositionalEncoding::Features(terms) => {
                let mut v = Vector::<S>::zeros(d);
                for t in terms {
                    let x: S = t.feature.eval(i, n);
                    let x = if t.num == 1 && t.den == 1 {
                        x
                    } else {
                        x * S::ratio(t.num, t.den)
                    };
                    v[t.coord] = v[t.coord].clone() + x;
                }
                Ok(v)
            }
        }
    }
}

/// `E(x, i) = TE(x) + PE(i)` with 0/1 token embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSpec<S> {
    /// One 0/1 row of length `d` per vocabulary symbol.
    pub token_embedding: Vec<Vec<bool>>,
    pub positional: PositionalEncoding<S>,
    /// Declared independence of the input length; checked against the encoding.
    pub length_independent: bool,
}

impl<S: Real> EmbeddingSpec<S> {
    pub fn embed(&self, t: TokenId, i: usize, n: usize, d: usize) -> Result<Vector<S>> {
        let mut v = self.positional.at(i, n, d)?;
        self.add_token(&mut v, t);
        Ok(v)
    }

    pub fn add_token(&self, v: &mut Vector<S>, t: TokenId) {
        for (c, &b) in self.token_embedding[t.0].iter().enumerate() {
            if b {
                v[c] = v[c].clone() + S::one();
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams<S> {
    pub query: Matrix<S>,
    pub key: Matrix<S>,
    pub value: Matrix<S>,
}

impl<S: Real> HeadParams<S> {
    pub fn zeros(d: usize) -> Self {
        HeadParams {
            query: Matrix::zeros(d, d),
            key: Matrix::zeros(d, d),
            value: Matrix::zeros(d, d),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionLayerParams<S> {
    pub heads: Vec<HeadParams<S>>,
    /// `d x (d H)` head-mixing matrix.
    pub mix: Matrix<S>,
    pub w1: Matrix<S>,
    pub b1: Vector<S>,
    pub w2: Matrix<S>,
    pub b2: Vector<S>,
}

impl<S: Real> AttentionLayerParams<S> {
    pub fn zeros(d: usize, heads: usize) -> Self {
        AttentionLayerParams {
            heads: (0..heads).map(|_| HeadParams::zeros(d)).collect(),
            mix: Matrix::zeros(d, d * heads),
            w1: Matrix::zeros(d, d),
            b1: Vector::zeros(d),
            w2: Matrix::zeros(d, d),
            b2: Vector::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let h = self.heads.len();
        if h == 0 {
            return Err(Error::Dimension("layer without heads".into()));
        }
        let square = |m: &Matrix<S>, what: &str| {
            if m.rows() == d && m.cols() == d {
                Ok(())
            } else {
                Err(Error::Dimension(format!(
                    "{what} is {}x{}, expected {d}x{d}",
                    m.rows(),
                    m.cols()
                )))
            }
        };
        for (k, head) in self.heads.iter().enumerate() {
            square(&head.query, &format!("Q[{k}]"))?;
            square(&head.key, &format!("K[{k}]"))?;
            square(&head.value, &format!("V[{k}]"))?;
        }
        square(&self.w1, "W1")?;
        square(&self.w2, "W2")?;
        if self.mix.rows() != d || self.mix.cols() != d * h {
            return Err(Error::Dimension(format!(
                "W_O is {}x{}, expected {d}x{}",
                self.mix.rows(),
                self.mix.cols(),
                d * h
            )));
        }
        if self.b1.dim() != d || self.b2.dim() != d {
            return Err(Error::Dimension("bias length differs from d".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformerModel<S> {
    pub d: usize,
    pub vocabulary: Vocabulary,
    pub embedding: EmbeddingSpec<S>,
    pub layers: Vec<AttentionLayerParams<S>>,
    /// `|vocabulary| x d` readout.
    pub readout: Matrix<S>,
    pub masking: Masking,
}

impl<S: Real> TransformerModel<S> {
    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        if d == 0 {
            return Err(Error::Dimension("d must be positive".into()));
        }
        self.vocabulary.validate()?;
        if self.layers.is_empty() {
            return Err(Error::InvalidInput("a model needs at least one layer".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer
                .validate(d)
                .map_err(|e| Error::Dimension(format!("layer {}: {e}", l + 1)))?;
        }
        if self.readout.rows() != self.vocabulary.len() || self.readout.cols() != d {
            return Err(Error::Dimension(format!(
                "readout is {}x{}, expected {}x{d}",
                self.readout.rows(),
                self.readout.cols(),
                self.vocabulary.len()
            )));
        }
        let te = &self.embedding.token_embedding;
        if te.len() != self.vocabulary.len() || te.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("token embedding shape".into()));
        }
        match &self.embedding.positional {
            PositionalEncoding::Table(rows) => {
                if rows.iter().any(|r| r.dim() != d) {
                    return Err(Error::Dimension("positional table row length".into()));
                }
            }
            PositionalEncoding::Features(terms) => {
                if let Some(t) = terms.iter().find(|t| t.coord >= d || t.den == 0) {
                    return Err(Error::Dimension(format!("bad PE term {t:?}")));
                }
            }
        }
        if self.embedding.length_independent && self.embedding.positional.depends_on_length() {
            return Err(Error::InvalidInput(
                "encoding declared length-independent but uses the length".into(),
            ));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn heads_per_layer(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.heads.len()).collect()
    }

    pub fn check_tokens(&self, tokens: &[TokenId]) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("empty input".into()));
        }
        if let Some(t) = tokens.iter().find(|t| t.0 >= self.vocabulary.len()) {
            return Err(Error::InvalidInput(format!("unknown token id {}", t.0)));
        }
        Ok(())
    }
}

/// Convenience wrappers over an unpruned [`Evaluator`].
pub fn head_value<S: Real>(
    layer: &AttentionLayerParams<S>,
    head: usize,
    inputs: &[Vector<S>],
    j: usize,
    masking: Masking,
) -> Result<Vector<S>> {
    eval::CompiledLayer::new(layer).head_value(head, inputs, j, masking, None)
}

pub fn layer_forward<S: Real>(
    layer: &AttentionLayerParams<S>,
    inputs: &[Vector<S>],
    masking: Masking,
) -> Result<Vec<Vector<S>>> {
    let d = layer.dim();
    if let Some(v) = inputs.iter().find(|v| v.dim() != d) {
        return Err(Error::Dimension(format!(
            "input of length {} to a d = {d} layer",
            v.dim()
        )));
    }
    layer.validate(d)?;
    eval::CompiledLayer::new(layer).forward_all(inputs, masking)
}

pub fn transformer_forward<S: Real>(model: &TransformerModel<S>, tokens: &[TokenId]) -> Result<TokenId> {
    Evaluator::new(model)?.forward(tokens)
}

pub fn last_position_state<S: Real>(model: &TransformerModel<S>, tokens: &[TokenId]) -> Result<Vector<S>> {
    Evaluator::new(model)?.last_state(tokens)
}

/// Argmax over readout logits; exact ties give `bottom`.
pub fn argmax_or_bottom<S: Real>(logits: &[S], bottom: TokenId) -> TokenId {
    let mut best = 0;
    let mut tie = false;
    for (t, l) in logits.iter().enumerate().skip(1) {
        if *l > logits[best] {
            best = t;
            tie = false;
        } else if *l == logits[best] {
            tie = true;
        }
    }
    if tie {
        bottom
    } else {
        TokenId(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_checks() {
        let v = Vocabulary::binary();
        assert_eq!(v.bit(true), TokenId(1));
        assert_eq!(v.as_bit(v.bottom()), None);
        assert!(Vocabulary::new(vec!["0".into(), "x".into()], TokenId(1)).is_err());
        assert!(Vocabulary::new(vec!["0".into(), "1".into()], TokenId(5)).is_err());
    }

    #[test]
    fn argmax_tie_rule() {
        let b = TokenId(2);
        assert_eq!(argmax_or_bottom(&[1.0, 2.0, 0.0], b), TokenId(1));
        assert_eq!(argmax_or_bottom(&[2.0, 2.0, 0.0], b), b);
        assert_eq!(argmax_or_bottom(&[0.0, 0.0, 0.0], b), b);
        // a tie below the maximum does not matter
        assert_eq!(argmax_or_bottom(&[1.0, 1.0, 3.0], b), TokenId(2));
        assert_eq!(argmax_or_bottom(&[3.0, 1.0, 1.0], b), TokenId(0));
    }

    #[test]
    fn pe_features_at_one() {
        let pe = PositionalEncoding::<f64>::Features(vec![
            PeTerm::new(0, PeFeature::Ln),
            PeTerm::new(1, PeFeature::Pow { k: 10 }),
            PeTerm::new(2, PeFeature::InvPow { k: 1 }),
            PeTerm::new(3, PeFeature::Tau),
            PeTerm::scaled(4, PeFeature::InvPow { k: 1 }, 1, 4),
        ]);
        let v = pe.at(1, 9, 5).unwrap().to_f64();
        assert_eq!(&v[..3], &[0.0, 1.0, 1.0]);
        assert!((v[3] - 13.0 / 3.0).abs() < 1e-15);
        assert_eq!(v[4], 0.25);
        assert!(!pe.depends_on_length());
    }
}
