//! Random models for property tests and the sensitivity sweep.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, Vector};
use crate::real::Real;

use super::{
    AttentionLayerParams, EmbeddingSpec, HeadParams, Masking, PositionalEncoding,
    TransformerModel, Vocabulary,
};

/// Shape and entry distribution of a random model. Every real entry is
/// `scale * U[-1, 1]`; token embeddings are independent fair bits; the
/// positional encoding is a table of `positions` rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomModelSpec {
    pub d: usize,
    pub layers: usize,
    pub heads: usize,
    pub positions: usize,
    pub scale: f64,
    pub masking: Masking,
}

impl RandomModelSpec {
    pub fn one_layer(d: usize, positions: usize, scale: f64) -> Self {
        RandomModelSpec {
            d,
            layers: 1,
            heads: 1,
            positions,
            scale,
            masking: Masking::Full,
        }
    }
}

fn entries<S: Real, R: Rng + ?Sized>(rng: &mut R, len: usize, scale: f64) -> Vec<S> {
    (0..len)
        .map(|_| S::from_f64(scale * rng.random_range(-1.0..=1.0)))
        .collect()
}

fn matrix<S: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix<S> {
    Matrix::from_rows(rows, cols, entries(rng, rows * cols, scale)).expect("shape")
}

pub fn random_model<S: Real, R: Rng + ?Sized>(spec: &RandomModelSpec, rng: &mut R) -> TransformerModel<S> {
    let d = spec.d;
    let s = spec.scale;
    let vocabulary = Vocabulary::binary();
    let token_embedding = (0..vocabulary.len())
        .map(|_| (0..d).map(|_| rng.random_bool(0.5)).collect())
        .collect();
    let table = (0..spec.positions)
        .map(|_| Vector::from(entries(rng, d, s)))
        .collect();
    let layers = (0..spec.layers)
        .map(|_| AttentionLayerParams {
            heads: (0..spec.heads)
                .map(|_| HeadParams {
                    query: matrix(rng, d, d, s),
                    key: matrix(rng, d, d, s),
                    value: matrix(rng, d, d, s),
                })
                .collect(),
            mix: matrix(rng, d, d * spec.heads, s),
            w1: matrix(rng, d, d, s),
            b1: entries(rng, d, s).into(),
            w2: matrix(rng, d, d, s),
            b2: entries(rng, d, s).into(),
        })
        .collect();
    TransformerModel {
        d,
        readout: matrix(rng, vocabulary.len(), d, s),
        vocabulary,
        embedding: EmbeddingSpec {
            token_embedding,
            positional: PositionalEncoding::Table(table),
            length_independent: true,
        },
        layers,
        masking: spec.masking,
    }
}
