use crate::error::{Error, Result};
use crate::real::{compensated_sum, Real};

/// Softmax computed on logits shifted by their maximum.
///
/// The largest logit maps to `exp(0) = 1`, so nothing overflows however large
/// the logits are; the denominator is summed with compensation.
pub fn stable_softmax<S: Real>(logits: &[S]) -> Result<Vec<S>> {
    let Some(first) = logits.first() else {
        return Err(Error::InvalidInput("softmax of an empty logit list".into()));
    };
    if let Some(i) = logits.iter().position(|l| !l.is_finite()) {
        return Err(Error::InvalidInput(format!("logit {i} is not finite")));
    }
    let max = logits
        .iter()
        .skip(1)
        .fold(first.clone(), |m, l| S::max_of(m, l.clone()));
    let exps: Vec<S> = logits.iter().map(|l| (l.clone() - max.clone()).exp()).collect();
    let denom = compensated_sum(exps.iter().cloned());
    Ok(exps.into_iter().map(|e| e / denom.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::DoubleDouble;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn equal_logits_are_uniform() {
        let w = stable_softmax(&[0.0f64, 0.0, 0.0]).unwrap();
        assert!(close(&w, &[1.0 / 3.0; 3], 1e-16));
    }

    #[test]
    fn closed_form_pair() {
        let w = stable_softmax(&[0.0f64, 3f64.ln()]).unwrap();
        assert!(close(&w, &[0.25, 0.75], 1e-15));
    }

    #[test]
    fn huge_logits_do_not_overflow() {
        let w = stable_softmax(&[1e9f64, 1e9 + 2f64.ln()]).unwrap();
        // ln 2 is absorbed at 1e9 to about 1e-7, so compare loosely
        assert!(close(&w, &[1.0 / 3.0, 2.0 / 3.0], 1e-6));
        let base = DoubleDouble::from_f64(1e9);
        let w = stable_softmax(&[base, base + DoubleDouble::from_i64(2).ln()]).unwrap();
        let w: Vec<f64> = w.iter().map(Real::to_f64).collect();
        assert!(close(&w, &[1.0 / 3.0, 2.0 / 3.0], 1e-15));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(stable_softmax::<f64>(&[]).is_err());
        assert!(stable_softmax(&[0.0, f64::INFINITY]).is_err());
        assert!(stable_softmax(&[f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn is_a_probability_vector(ls in proptest::collection::vec(-700.0f64..700.0, 1..40)) {
            let w = stable_softmax(&ls).unwrap();
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            let s: f64 = compensated_sum(w.iter().copied());
            prop_assert!((s - 1.0).abs() <= 4.0 * f64::EPSILON);
        }

        #[test]
        fn shift_by_dyadic_integer_is_exact(
            ks in proptest::collection::vec(-1000i64..1000, 1..20),
            shift in -1_000_000i64..1_000_000,
        ) {
            // logits on a 1/8 grid; integer shifts keep every difference exact
            let ls: Vec<f64> = ks.iter().map(|&k| k as f64 / 8.0).collect();
            let moved: Vec<f64> = ls.iter().map(|l| l + shift as f64).collect();
            prop_assert_eq!(stable_softmax(&ls).unwrap(), stable_softmax(&moved).unwrap());
        }
    }
}
