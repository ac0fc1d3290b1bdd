//! Straight-line evaluation written directly from the layer equations, with
//! dense loops and no compilation. Used to cross-check [`super::Evaluator`].

use crate::error::Result;
use crate::real::Real;

use super::{argmax_or_bottom, Masking, TokenId, TransformerModel};

fn matvec<S: Real>(m: &crate::linalg::Matrix<S>, x: &[S]) -> Vec<S> {
    (0..m.rows())
        .map(|r| {
            let mut s = S::zero();
            for c in 0..m.cols() {
                s = s + m[(r, c)].clone() * x[c].clone();
            }
            s
        })
        .collect()
}

/// Per-layer states, including the embedding at index 0.
pub fn states<S: Real>(model: &TransformerModel<S>, tokens: &[TokenId]) -> Result<Vec<Vec<Vec<S>>>> {
    model.validate()?;
    model.check_tokens(tokens)?;
    let n = tokens.len();
    let d = model.d;
    let mut xs: Vec<Vec<S>> = Vec::with_capacity(n);
    for (i, &t) in tokens.iter().enumerate() {
        xs.push(model.embedding.embed(t, i + 1, n, d)?.into_inner());
    }
    let root_d = S::from_usize(d).sqrt();
    let mut all = vec![xs.clone()];
    for layer in &model.layers {
        let mut next = Vec::with_capacity(n);
        for j in 0..n {
            let visible = match model.masking {
                Masking::Full => n,
                Masking::Causal => j + 1,
            };
            let mut stacked = Vec::with_capacity(d * layer.heads.len());
            for head in &layer.heads {
                let q = matvec(&head.query, &xs[j]);
                let scores: Vec<S> = (0..visible)
                    .map(|i| {
                        let k = matvec(&head.key, &xs[i]);
                        let mut s = S::zero();
                        for r in 0..d {
                            s = s + k[r].clone() * q[r].clone();
                        }
                        s / root_d.clone()
                    })
                    .collect();
                let mut top = scores[0].clone();
                for s in &scores {
                    if *s > top {
                        top = s.clone();
                    }
                }
                let e: Vec<S> = scores.iter().map(|s| (s.clone() - top.clone()).exp()).collect();
                let mut z = S::zero();
                for w in &e {
                    z = z + w.clone();
                }
                let mut val = vec![S::zero(); d];
                for i in 0..visible {
                    let v = matvec(&head.value, &xs[i]);
                    for r in 0..d {
                        val[r] = val[r].clone() + e[i].clone() / z.clone() * v[r].clone();
                    }
                }
                stacked.extend(val);
            }
            let h = matvec(&layer.mix, &stacked);
            let u: Vec<S> = (0..d).map(|r| h[r].clone() + xs[j][r].clone()).collect();
            let pre = matvec(&layer.w1, &u);
            let hid: Vec<S> = (0..d)
                .map(|r| {
                    let v = pre[r].clone() + layer.b1[r].clone();
                    if v > S::zero() {
                        v
                    } else {
                        S::zero()
                    }
                })
                .collect();
            let o = matvec(&layer.w2, &hid);
            next.push((0..d).map(|r| o[r].clone() + layer.b2[r].clone()).collect());
        }
        xs = next;
        all.push(xs.clone());
    }
    Ok(all)
}

pub fn readout_logits<S: Real>(model: &TransformerModel<S>, tokens: &[TokenId]) -> Result<Vec<S>> {
    let st = states(model, tokens)?;
    let last = &st.last().expect("states")[tokens.len() - 1];
    Ok(matvec(&model.readout, last))
}

pub fn forward<S: Real>(model: &TransformerModel<S>, tokens: &[TokenId]) -> Result<TokenId> {
    let l = readout_logits(model, tokens)?;
    Ok(argmax_or_bottom(&l, model.vocabulary.bottom()))
}
