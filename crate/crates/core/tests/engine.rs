use parity_transformer::bits;
use parity_transformer::engine::random::{random_model, RandomModelSpec};
use parity_transformer::engine::{
    self, head_value, layer_forward, reference, stable_softmax, AttentionLayerParams, Evaluator, Masking,
    TokenId, TransformerModel,
};
use parity_transformer::linalg::{Matrix, Vector};
use parity_transformer::real::{BigReal, DoubleDouble, Real};
use parity_transformer::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn random_tokens(rng: &mut ChaCha8Rng, n: usize) -> Vec<TokenId> {
    use rand::Rng;
    (0..n).map(|_| TokenId(rng.random_range(0..2))).collect()
}

#[test]
fn softmax_examples() {
    let w = stable_softmax(&[0.0, 0.0, 0.0]).unwrap();
    assert!(w.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-16));
    let w = stable_softmax(&[0.0, 3f64.ln()]).unwrap();
    assert!((w[0] - 0.25).abs() < 1e-16 && (w[1] - 0.75).abs() < 1e-16);
    let w = stable_softmax(&[1e9, 1e9 + 2f64.ln()]).unwrap();
    assert!((w[0] - 1.0 / 3.0).abs() < 1e-6);
    assert!(stable_softmax::<f64>(&[]).is_err());
    assert!(matches!(stable_softmax(&[0.0, f64::NAN]), Err(Error::InvalidInput(_))));
}

#[test]
fn oracle_equivalence_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..60 {
        let d = 1 + trial % 4;
        let spec = RandomModelSpec {
            d,
            layers: 1 + trial % 3,
            heads: 1 + trial % 2,
            positions: 6,
            scale: 1.0,
            masking: if trial % 2 == 0 { Masking::Full } else { Masking::Causal },
        };
        let m = random_model::<f64, _>(&spec, &mut rng);
        for n in 1..=6 {
            let toks = random_tokens(&mut rng, n);
            let ev = Evaluator::unpruned(&m).unwrap();
            let fast = ev.states(&toks).unwrap();
            let slow = reference::states(&m, &toks).unwrap();
            for (fl, sl) in fast.iter().zip(&slow) {
                for (fv, sv) in fl.iter().zip(sl) {
                    assert!(rel_dev(&fv.to_f64(), sv) <= 1e-12, "trial {trial}, n = {n}");
                }
            }
            let l1 = ev.readout_logits(&toks).unwrap();
            let l2 = reference::readout_logits(&m, &toks).unwrap();
            assert!(rel_dev(&l1, &l2) <= 1e-12);
        }
    }
}

#[test]
fn pruned_and_unpruned_agree_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..30 {
        let spec = RandomModelSpec {
            d: 3,
            layers: 1 + trial % 3,
            heads: 2,
            positions: 7,
            scale: 2.0,
            masking: if trial % 2 == 0 { Masking::Full } else { Masking::Causal },
        };
        let mut m = random_model::<f64, _>(&spec, &mut rng);
        // sparsify the readout so pruning has something to skip
        for c in 1..3 {
            for t in 0..3 {
                m.readout[(t, c)] = 0.0;
            }
        }
        let a = Evaluator::new(&m).unwrap();
        let b = Evaluator::unpruned(&m).unwrap();
        for n in 1..=7 {
            let toks = random_tokens(&mut rng, n);
            assert_eq!(a.readout_logits(&toks).unwrap(), b.readout_logits(&toks).unwrap());
        }
    }
}

#[test]
fn one_layer_full_equals_causal() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let mut m = random_model::<f64, _>(&RandomModelSpec::one_layer(3, 8, 2.0), &mut rng);
        for n in 1..=8 {
            for k in 0..1u64 << n {
                let toks = m.vocabulary.encode_bits(&bits::from_index(n, k));
                m.masking = Masking::Full;
                let full = engine::transformer_forward(&m, &toks).unwrap();
                m.masking = Masking::Causal;
                let causal = engine::transformer_forward(&m, &toks).unwrap();
                assert_eq!(full, causal);
            }
        }
    }
}

#[test]
fn masking_differs_before_the_last_position() {
    // position 1 attends only to itself under causal masking
    let mut l = AttentionLayerParams::<f64>::zeros(1, 1);
    l.heads[0].value[(0, 0)] = 1.0;
    l.mix[(0, 0)] = 1.0;
    let xs = vec![Vector::from(vec![1.0]), Vector::from(vec![3.0])];
    let full = head_value(&l, 0, &xs, 1, Masking::Full).unwrap();
    let causal = head_value(&l, 0, &xs, 1, Masking::Causal).unwrap();
    assert_eq!(full[0], 2.0);
    assert_eq!(causal[0], 1.0);
    // the last position sees everything either way
    assert_eq!(
        head_value(&l, 0, &xs, 2, Masking::Full).unwrap(),
        head_value(&l, 0, &xs, 2, Masking::Causal).unwrap()
    );
}

#[test]
fn head_value_edge_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let m = random_model::<f64, _>(&RandomModelSpec::one_layer(3, 4, 1.0), &mut rng);
    let mut l = m.layers[0].clone();
    let xs: Vec<Vector<f64>> = (0..4).map(|k| Vector::from_f64(&[k as f64, 1.0, -0.5])).collect();
    let v1 = l.heads[0].value.matvec(&xs[0]);
    assert_eq!(head_value(&l, 0, &xs[..1], 1, Masking::Full).unwrap(), v1);
    assert_eq!(head_value(&l, 0, &xs, 1, Masking::Causal).unwrap(), v1);
    l.heads[0].query = Matrix::zeros(3, 3);
    let mean = head_value(&l, 0, &xs, 2, Masking::Full).unwrap();
    for r in 0..3 {
        let m: f64 = xs.iter().map(|x| l.heads[0].value.matvec(x)[r]).sum::<f64>() / 4.0;
        assert!((mean[r] - m).abs() < 1e-15);
    }
    assert!(head_value(&l, 0, &xs, 0, Masking::Full).is_err());
    assert!(head_value(&l, 0, &xs, 5, Masking::Full).is_err());
}

#[test]
fn constant_collapse() {
    let mut l = AttentionLayerParams::<f64>::zeros(3, 2);
    l.w2 = Matrix::from_f64(3, 3, &[1.0, -2.0, 3.0, 0.5, 0.0, 4.0, 1.0, 1.0, 1.0]).unwrap();
    l.b2 = Vector::from_f64(&[7.0, -1.0, 0.25]);
    l.heads[0].query = Matrix::identity(3);
    let xs: Vec<Vector<f64>> = (0..4).map(|k| Vector::from_f64(&[k as f64, 2.0, -1.0])).collect();
    for m in [Masking::Full, Masking::Causal] {
        for b in layer_forward(&l, &xs, m).unwrap() {
            assert_eq!(b, l.b2);
        }
    }
    assert!(matches!(
        layer_forward(&l, &[Vector::from_f64(&[1.0])], Masking::Full),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn zero_readout_ties_to_bottom() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut m = random_model::<f64, _>(&RandomModelSpec::one_layer(3, 5, 1.0), &mut rng);
    m.readout = Matrix::zeros(3, 3);
    let toks = m.vocabulary.encode_bits(&[true, false, true]);
    assert_eq!(engine::transformer_forward(&m, &toks).unwrap(), m.vocabulary.bottom());
}

#[test]
fn readout_of_last_state_matches_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let spec = RandomModelSpec {
            d: 4,
            layers: 2,
            heads: 2,
            positions: 6,
            scale: 1.0,
            masking: Masking::Causal,
        };
        let m = random_model::<f64, _>(&spec, &mut rng);
        let toks = random_tokens(&mut rng, 6);
        let b = engine::last_position_state(&m, &toks).unwrap();
        let logits: Vec<f64> = (0..3).map(|t| Vector::from(m.readout.row(t).to_vec()).dot(&b)).collect();
        let t = engine::argmax_or_bottom(&logits, m.vocabulary.bottom());
        assert_eq!(t, engine::transformer_forward(&m, &toks).unwrap());
    }
}

#[test]
fn zero_layers_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut m = random_model::<f64, _>(&RandomModelSpec::one_layer(2, 3, 1.0), &mut rng);
    m.layers.clear();
    assert!(engine::last_position_state(&m, &[TokenId(0)]).is_err());
}

#[test]
fn unknown_token_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let m = random_model::<f64, _>(&RandomModelSpec::one_layer(2, 3, 1.0), &mut rng);
    assert!(engine::transformer_forward(&m, &[TokenId(0), TokenId(9)]).is_err());
    assert!(engine::transformer_forward(&m, &[]).is_err());
}

fn convert<S: Real>(m: &TransformerModel<f64>) -> TransformerModel<S> {
    engine::io::from_str(&engine::io::to_string(m)).unwrap()
}

#[test]
fn more_precision_barely_moves_the_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..10 {
        let spec = RandomModelSpec {
            d: 4,
            layers: 2,
            heads: 2,
            positions: 6,
            scale: 1.0,
            masking: Masking::Full,
        };
        let m = random_model::<f64, _>(&spec, &mut rng);
        let toks = random_tokens(&mut rng, 6);
        let lo = engine::last_position_state(&m, &toks).unwrap();
        let dd = engine::last_position_state(&convert::<DoubleDouble>(&m), &toks).unwrap();
        let big = engine::last_position_state(&convert::<BigReal<128>>(&m), &toks).unwrap();
        assert!(rel_dev(&lo.to_f64(), &dd.to_f64()) < 1e-6);
        assert!(rel_dev(&dd.to_f64(), &big.to_f64()) < 1e-15);
    }
}

#[test]
fn evaluation_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let m = random_model::<DoubleDouble, _>(&RandomModelSpec::one_layer(4, 6, 3.0), &mut rng);
    let toks = random_tokens(&mut rng, 6);
    let a = engine::last_position_state(&m, &toks).unwrap();
    let b = engine::last_position_state(&m, &toks).unwrap();
    assert_eq!(a, b);
}

#[test]
fn overflow_is_a_precision_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut m = random_model::<f64, _>(&RandomModelSpec::one_layer(2, 3, 1.0), &mut rng);
    m.layers[0].w2[(0, 0)] = 1e308;
    m.layers[0].w2[(0, 1)] = 1e308;
    m.layers[0].b1 = Vector::from_f64(&[10.0, 10.0]);
    let e = engine::transformer_forward(&m, &[TokenId(1), TokenId(0)]).unwrap_err();
    assert!(matches!(e, Error::Precision(_)), "{e}");
    assert!(e.to_string().contains("--precision ext:"));
}

proptest! {
    #[test]
    fn softmax_shift_invariance_is_exact(
        logits in proptest::collection::vec(-50i32..50, 1..12),
        shift in -40i32..40,
        exp in -3i32..4,
    ) {
        // dyadic shifts of dyadic logits are exact in every backend
        let scale = 2f64.powi(exp);
        let l: Vec<f64> = logits.iter().map(|&k| k as f64 * scale).collect();
        let s: Vec<f64> = l.iter().map(|&x| x + shift as f64 * scale).collect();
        prop_assert_eq!(stable_softmax(&l).unwrap(), stable_softmax(&s).unwrap());
        let ld: Vec<DoubleDouble> = l.iter().map(|&x| DoubleDouble::from_f64(x)).collect();
        let sd: Vec<DoubleDouble> = s.iter().map(|&x| DoubleDouble::from_f64(x)).collect();
        prop_assert_eq!(stable_softmax(&ld).unwrap(), stable_softmax(&sd).unwrap());
    }

    #[test]
    fn random_one_layer_agrees_with_oracle(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model::<f64, _>(&RandomModelSpec::one_layer(3, 6, 1.5), &mut rng);
        let toks = random_tokens(&mut rng, n);
        let l1 = Evaluator::new(&m).unwrap().readout_logits(&toks).unwrap();
        let l2 = reference::readout_logits(&m, &toks).unwrap();
        prop_assert!(rel_dev(&l1, &l2) <= 1e-12);
    }
}
