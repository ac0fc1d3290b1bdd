use parity_transformer::bits;
use parity_transformer::engine::{Evaluator, TokenId, TransformerModel};
use parity_transformer::parity::formulas::{big_gamma_exact, gamma_exact, layer3_logits, DerivedConstants};
use parity_transformer::parity::{
    attention_gap, build_full_model, build_full_model_with_dim, build_majority_model, build_restricted_model,
    split_strings, CoordinateLayout, ConstructionParams,
};
use parity_transformer::real::{DoubleDouble, Real};
use parity_transformer::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn expected(model: &TransformerModel<impl Real>, x: &[bool]) -> TokenId {
    model.vocabulary.bit(bits::parity(x))
}

#[test]
fn full_model_computes_parity_exhaustively() {
    let p = ConstructionParams::calibrated();
    let model = build_full_model::<f64>(&p).unwrap();
    let ev = Evaluator::new(&model).unwrap().with_position_cache(12).unwrap();
    for n in p.n_min..=12 {
        for k in 0..1u64 << n {
            let x = bits::from_index(n, k);
            assert_eq!(ev.forward_bits(&x).unwrap(), expected(&model, &x), "{}", bits::format(&x));
        }
    }
}

#[test]
fn restricted_model_on_its_range() {
    let p = ConstructionParams::calibrated();
    let model = build_restricted_model::<f64>(&p).unwrap();
    let l = CoordinateLayout::restricted();
    let ev = Evaluator::new(&model).unwrap();
    for n in 8..=12 {
        for k in 0..1u64 << n {
            let x = bits::from_index(n, k);
            let s = bits::weight(&x);
            if s == 0 || s > p.restricted_sigma_max(n) {
                continue;
            }
            assert_eq!(ev.forward_bits(&x).unwrap(), expected(&model, &x));
            let z = ev.last_state(&model.vocabulary.encode_bits(&x)).unwrap()[l.z[0]];
            let target = if s.is_multiple_of(2) { 1.0 } else { -1.0 };
            assert!((z - target).abs() <= 0.1, "{}: z = {z}", bits::format(&x));
        }
    }
}

fn random_input(rng: &mut ChaCha8Rng, n: usize, weight: usize) -> Vec<bool> {
    let mut x = vec![false; n];
    let mut placed = 0;
    while placed < weight {
        let i = rng.random_range(0..n);
        if !x[i] {
            x[i] = true;
            placed += 1;
        }
    }
    x
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn realized_quantities_match_closed_forms() {
    let p = ConstructionParams::calibrated();
    let model = build_restricted_model::<DoubleDouble>(&p).unwrap();
    let l = CoordinateLayout::restricted();
    let ev = Evaluator::unpruned(&model).unwrap();
    let k = DerivedConstants::<DoubleDouble>::new(p.alpha);
    let alpha = DoubleDouble::from_f64(p.alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [16usize, 40, 100] {
        for s in [1, 2, 3, p.restricted_sigma_max(n)] {
            let x = random_input(&mut rng, n, s);
            let states = ev.states(&model.vocabulary.encode_bits(&x)).unwrap();
            let gamma = gamma_exact(s, n, &alpha).unwrap();
            let big = big_gamma_exact(&gamma, n);
            assert!(rel(states[1][n - 1][l.gamma[0]].to_f64(), gamma.to_f64()) < 1e-9);
            assert!(rel(states[2][n - 1][l.big_gamma[0]].to_f64(), big.to_f64()) < 1e-9);
            let realized = ev.attention_logits(2, 0, &states[2], n).unwrap();
            let closed = layer3_logits(s, n, &k).unwrap();
            let scale = closed.iter().fold(0.0f64, |m, v| m.max(v.to_f64().abs()));
            for (a, b) in realized.iter().zip(&closed) {
                assert!((a.to_f64() - b.to_f64()).abs() / scale < 1e-9, "n = {n}, Σ = {s}");
            }
        }
    }
}

#[test]
fn full_model_layers_carry_split_strings() {
    let p = ConstructionParams::calibrated();
    let model = build_full_model::<f64>(&p).unwrap();
    let l = CoordinateLayout::full(p.m);
    let ev = Evaluator::unpruned(&model).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [8usize, 13, 30] {
        let x: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let states = ev.states(&model.vocabulary.encode_bits(&x)).unwrap();
        let split = split_strings(&x, p.m).unwrap();
        for (r, sr) in split.iter().enumerate() {
            for i in 0..n {
                assert_eq!(states[1][i][l.split[r]], if sr[i] { 1.0 } else { 0.0 });
            }
        }
    }
}

#[test]
fn positional_encoding_bound() {
    let p = ConstructionParams::calibrated();
    let model = build_full_model::<f64>(&p).unwrap();
    let pe = &model.embedding.positional;
    let mut worst = 0.0f64;
    for i in (1..=10_000).step_by(7).chain([10_000]) {
        let v = pe.at(i, 10_000, model.d).unwrap();
        let m = v.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        worst = worst.max(m / (i as f64).powi(10));
    }
    assert!(worst <= 8.0, "{worst}");
    assert!(!pe.depends_on_length());
}

#[test]
fn positional_encoding_is_length_free_with_one_hot_residues() {
    let p = ConstructionParams::calibrated();
    let model = build_full_model::<f64>(&p).unwrap();
    let l = CoordinateLayout::full(p.m);
    let pe = &model.embedding.positional;
    for i in 1..=40 {
        let a = pe.at(i, 40, model.d).unwrap();
        assert_eq!(a, pe.at(i, 1000, model.d).unwrap());
        let hot: Vec<usize> = (0..p.m).filter(|&r| a[l.residue[r]] == 1.0).collect();
        assert_eq!(hot, vec![i % p.m]);
        assert_eq!(l.residue.iter().map(|&c| a[c]).sum::<f64>(), 1.0);
    }
}

#[test]
fn majority_exhaustive() {
    let model = build_majority_model::<f64>();
    let ev = Evaluator::new(&model).unwrap();
    for n in 1..=16 {
        for k in 0..1u64 << n {
            let x = bits::from_index(n, k);
            let want = model.vocabulary.bit(bits::majority(&x));
            assert_eq!(ev.forward_bits(&x).unwrap(), want, "{}", bits::format(&x));
        }
    }
    let one = model.vocabulary.bit(true);
    assert_eq!(ev.forward_bits(&bits::parse("11100").unwrap()).unwrap(), one);
    assert_eq!(ev.forward_bits(&bits::parse("1100").unwrap()).unwrap(), model.vocabulary.bit(false));
}

#[test]
fn large_alpha_loses_the_gap() {
    let p = ConstructionParams { alpha: 0.9, ..ConstructionParams::calibrated() };
    let n = 512;
    let worst = (1..=p.restricted_sigma_max(n))
        .map(|s| attention_gap::<DoubleDouble>(n, s, &p).unwrap().to_f64())
        .fold(f64::INFINITY, f64::min);
    assert!(worst < 0.0, "{worst}");
    let ok = ConstructionParams::calibrated();
    for s in 1..=ok.restricted_sigma_max(n) {
        assert!(attention_gap::<DoubleDouble>(n, s, &ok).unwrap().to_f64() > 0.0);
    }
}

#[test]
fn narrow_width_is_a_build_error() {
    let p = ConstructionParams::calibrated();
    let need = CoordinateLayout::full(p.m).d;
    assert!(matches!(build_full_model_with_dim::<f64>(&p, need - 1), Err(Error::Build(_))));
    let wide = build_full_model_with_dim::<f64>(&p, need + 5).unwrap();
    let ev = Evaluator::new(&wide).unwrap();
    let x = bits::parse("10110101").unwrap();
    assert_eq!(ev.forward_bits(&x).unwrap(), wide.vocabulary.bit(true));
}

#[test]
fn restricted_builder_validates_params() {
    let bad = ConstructionParams { m: 5, ..ConstructionParams::calibrated() };
    assert!(build_restricted_model::<f64>(&bad).is_err());
    assert!(build_full_model::<f64>(&bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn full_model_agrees_with_parity_beyond_the_table(seed in any::<u64>(), n in 13usize..=48) {
        let p = ConstructionParams::calibrated();
        let model = build_full_model::<f64>(&p).unwrap();
        let ev = Evaluator::new(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        prop_assert_eq!(ev.forward_bits(&x).unwrap(), expected(&model, &x));
    }

    #[test]
    fn split_weights_are_bounded(seed in any::<u64>(), n in 6usize..=64) {
        let p = ConstructionParams::calibrated();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let split = split_strings(&x, p.m).unwrap();
        let total: usize = split.iter().map(|s| bits::weight(s)).sum();
        prop_assert_eq!(total, bits::weight(&x) + p.m);
        for s in &split {
            prop_assert!(bits::weight(s) <= parity_transformer::parity::max_split_weight(n, p.m));
        }
    }
}
