//! JSON model files.
//!
//! Matrices are stored as `{"rows", "cols", "data"}` with row-major data.
//! Scalars are JSON numbers for the double backend (shortest round-trip form)
//! and lossless strings for extended backends. The top-level `precision`
//! field records the backend that wrote the file.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::real::Real;

use super::{
    AttentionLayerParams, EmbeddingSpec, HeadParams, Masking, PeTerm, PositionalEncoding,
    TransformerModel, Vocabulary,
};

pub const FORMAT_TAG: &str = "softmax-transformer/1";

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn vec_json<S: Real>(xs: &[S]) -> Value {
    Value::Array(xs.iter().map(Real::to_json).collect())
}

fn matrix_json<S: Real>(m: &Matrix<S>) -> Value {
    json!({"rows": m.rows(), "cols": m.cols(), "data": vec_json(m.data())})
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| bad(format!("missing field `{key}`")))
}

fn usize_field(v: &Value, key: &str) -> Result<usize> {
    field(v, key)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| bad(format!("`{key}` is not a non-negative integer")))
}

fn scalars<S: Real>(v: &Value) -> Result<Vec<S>> {
    v.as_array()
        .ok_or_else(|| bad("expected an array of scalars"))?
        .iter()
        .map(|x| S::from_json(x).ok_or_else(|| bad(format!("bad scalar {x}"))))
        .collect()
}

fn matrix_from<S: Real>(v: &Value) -> Result<Matrix<S>> {
    let rows = usize_field(v, "rows")?;
    let cols = usize_field(v, "cols")?;
    Matrix::from_rows(rows, cols, scalars(field(v, "data")?)?)
}

fn vector_from<S: Real>(v: &Value) -> Result<Vector<S>> {
    Ok(scalars(v)?.into())
}

pub fn to_json<S: Real>(model: &TransformerModel<S>) -> Value {
    let positional = match &model.embedding.positional {
        PositionalEncoding::Table(rows) => {
            let flat: Vec<S> = rows.iter().flat_map(|r| r.iter().cloned()).collect();
            json!({"table": {"rows": rows.len(), "cols": model.d, "data": vec_json(&flat)}})
        }
        PositionalEncoding::Features(terms) => json!({"features": terms}),
    };
    let te: Vec<Vec<u8>> = model
        .embedding
        .token_embedding
        .iter()
        .map(|r| r.iter().map(|&b| b as u8).collect())
        .collect();
    let layers: Vec<Value> = model
        .layers
        .iter()
        .map(|l| {
            let heads: Vec<Value> = l
                .heads
                .iter()
                .map(|h| {
                    json!({
                        "query": matrix_json(&h.query),
                        "key": matrix_json(&h.key),
                        "value": matrix_json(&h.value),
                    })
                })
                .collect();
            json!({
                "heads": heads,
                "mix": matrix_json(&l.mix),
                "w1": matrix_json(&l.w1),
                "b1": vec_json(l.b1.as_slice()),
                "w2": matrix_json(&l.w2),
                "b2": vec_json(l.b2.as_slice()),
            })
        })
        .collect();
    let mut top = Map::new();
    top.insert("format".into(), FORMAT_TAG.into());
    top.insert("precision".into(), S::backend_name().into());
    top.insert("d".into(), model.d.into());
    top.insert("masking".into(), serde_json::to_value(model.masking).expect("enum"));
    top.insert(
        "vocabulary".into(),
        serde_json::to_value(&model.vocabulary).expect("plain struct"),
    );
    top.insert(
        "embedding".into(),
        json!({
            "token_embedding": te,
            "length_independent": model.embedding.length_independent,
            "positional": positional,
        }),
    );
    top.insert("layers".into(), Value::Array(layers));
    top.insert("readout".into(), matrix_json(&model.readout));
    Value::Object(top)
}

pub fn from_json<S: Real>(v: &Value) -> Result<TransformerModel<S>> {
    match v.get("format").and_then(Value::as_str) {
        Some(FORMAT_TAG) => {}
        other => return Err(bad(format!("unknown format tag {other:?}"))),
    }
    let d = usize_field(v, "d")?;
    let masking: Masking = serde_json::from_value(field(v, "masking")?.clone())?;
    let vocabulary: Vocabulary = serde_json::from_value(field(v, "vocabulary")?.clone())?;
    let emb = field(v, "embedding")?;
    let token_embedding = field(emb, "token_embedding")?
        .as_array()
        .ok_or_else(|| bad("token_embedding must be an array"))?
        .iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| bad("token_embedding row"))?
                .iter()
                .map(|b| match b.as_u64() {
                    Some(0) => Ok(false),
                    Some(1) => Ok(true),
                    _ => Err(bad("token embedding entries must be 0 or 1")),
                })
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let length_independent = field(emb, "length_independent")?
        .as_bool()
        .ok_or_else(|| bad("length_independent must be a boolean"))?;
    let pos = field(emb, "positional")?;
    let positional = if let Some(t) = pos.get("table") {
        let m: Matrix<S> = matrix_from(t)?;
        PositionalEncoding::Table((0..m.rows()).map(|r| Vector::from(m.row(r).to_vec())).collect())
    } else if let Some(f) = pos.get("features") {
        PositionalEncoding::Features(serde_json::from_value::<Vec<PeTerm>>(f.clone())?)
    } else {
        return Err(bad("positional must hold `table` or `features`"));
    };
    let layers = field(v, "layers")?
        .as_array()
        .ok_or_else(|| bad("layers must be an array"))?
        .iter()
        .map(|l| {
            let heads = field(l, "heads")?
                .as_array()
                .ok_or_else(|| bad("heads must be an array"))?
                .iter()
                .map(|h| {
                    Ok(HeadParams {
                        query: matrix_from(field(h, "query")?)?,
                        key: matrix_from(field(h, "key")?)?,
                        value: matrix_from(field(h, "value")?)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AttentionLayerParams {
                heads,
                mix: matrix_from(field(l, "mix")?)?,
                w1: matrix_from(field(l, "w1")?)?,
                b1: vector_from(field(l, "b1")?)?,
                w2: matrix_from(field(l, "w2")?)?,
                b2: vector_from(field(l, "b2")?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let model = TransformerModel {
        d,
        vocabulary,
        embedding: EmbeddingSpec {
            token_embedding,
            positional,
            length_independent,
        },
        layers,
        readout: matrix_from(field(v, "readout")?)?,
        masking,
    };
    model.validate()?;
    Ok(model)
}

pub fn to_string<S: Real>(model: &TransformerModel<S>) -> String {
    serde_json::to_string_pretty(&to_json(model)).expect("json values serialize")
}

pub fn from_str<S: Real>(s: &str) -> Result<TransformerModel<S>> {
    from_json(&serde_json::from_str(s)?)
}

pub fn save<S: Real>(model: &TransformerModel<S>, path: &Path) -> Result<()> {
    crate::report::write_atomic(path, to_string(model).as_bytes())
}

pub fn load<S: Real>(path: &Path) -> Result<TransformerModel<S>> {
    from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::random::{random_model, RandomModelSpec};
    use crate::real::DoubleDouble;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn double_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m: TransformerModel<f64> = random_model(&RandomModelSpec::one_layer(3, 5, 10.0), &mut rng);
        let back: TransformerModel<f64> = from_str(&to_string(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn extended_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut m: TransformerModel<DoubleDouble> =
            random_model(&RandomModelSpec::one_layer(2, 3, 1.0), &mut rng);
        m.layers[0].w1[(0, 0)] = DoubleDouble::ratio(1, 3);
        let text = to_string(&m);
        assert!(text.contains("\"ext:106\""));
        let back: TransformerModel<DoubleDouble> = from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m: TransformerModel<f64> = random_model(&RandomModelSpec::one_layer(3, 4, 1.0), &mut rng);
        let mut v = to_json(&m);
        v["d"] = 4.into();
        assert!(from_json::<f64>(&v).is_err());
        v["d"] = 3.into();
        v["format"] = "nope".into();
        assert!(from_json::<f64>(&v).is_err());
    }
}
