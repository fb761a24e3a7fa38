//! Randomized invariant checks over the numeric building blocks.

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use rotortemp::data::{Dataset, RawSample};
use rotortemp::eval::compute_metrics;
use rotortemp::features::{alpha_from_rc, alpha_from_span, EwAccum};
use rotortemp::linmodel::{fit_ols, fit_wls};
use rotortemp::neighbors::{fit_knn, Weighting};

fn finite_signal(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1e3..1e3f64, 2..len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ewma_bounded_and_ewms_nonnegative(xs in finite_signal(200), span in 1usize..500) {
        let alpha = alpha_from_span::<f64>(span);
        let mut acc = EwAccum::new();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &x in &xs {
            lo = lo.min(x);
            hi = hi.max(x);
            let (mean, std) = acc.update(x, alpha);
            prop_assert!(mean >= lo - 1e-9 && mean <= hi + 1e-9);
            prop_assert!(std >= 0.0);
            // Spread never exceeds the observed range.
            prop_assert!(std <= (hi - lo) + 1e-9);
        }
    }

    #[test]
    fn alpha_from_rc_decreases_with_rc(rc_a in 0.0..1e4f64, delta in 1e-6..1e4f64, h in 1e-3..10.0f64) {
        let a1 = alpha_from_rc(rc_a, h).unwrap();
        let a2 = alpha_from_rc(rc_a + delta, h).unwrap();
        prop_assert!(a2 < a1);
        prop_assert!(a1 <= 1.0 && a2 > 0.0);
    }

    #[test]
    fn split_is_a_partition(assignment in proptest::collection::vec(0usize..4, 8..60), take in 0usize..4) {
        let rows: Vec<RawSample<f64>> = assignment
            .iter()
            .enumerate()
            .map(|(i, &p)| RawSample {
                ambient: 25.0,
                coolant: 30.0,
                u_d: i as f64,
                u_q: 0.0,
                i_d: 0.0,
                i_q: 0.0,
                motor_speed: 0.0,
                pm: 40.0,
                profile_id: format!("p{p}"),
            })
            .collect();
        let ds = Dataset::from_samples(rows, 2.0).unwrap();
        let ids: Vec<String> = ds.profile_ids().iter().map(|s| s.to_string()).collect();
        let test_ids: Vec<String> = ids.iter().take(take.min(ids.len().saturating_sub(1))).cloned().collect();
        let (train, test) = ds.split_profiles(&test_ids).unwrap();
        prop_assert_eq!(train.len() + test.len(), ds.len());
        for id in test.profile_ids() {
            prop_assert!(!train.profile_ids().contains(&id));
        }
    }

    #[test]
    fn wls_is_invariant_to_weight_scaling(seed in 0u64..1000, scale in 1e-3..1e3f64) {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 40;
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-5.0..5.0));
        let w = Array1::from_shape_fn(n, |_| rng.random_range(0.05..2.0));
        let a = fit_wls(&x, &y, &w).unwrap();
        let b = fit_wls(&x, &y, &w.mapv(|v| v * scale)).unwrap();
        for c in 0..a.coefficients.len() {
            let tol = 1e-10 * a.coefficients[c].abs().max(1.0);
            prop_assert!((a.coefficients[c] - b.coefficients[c]).abs() <= tol);
        }
    }

    #[test]
    fn ols_residuals_orthogonal_to_columns(seed in 0u64..1000) {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let x = Array2::from_shape_fn((n, 4), |_| rng.random_range(-2.0..2.0));
        let y: Array1<f64> = Array1::from_shape_fn(n, |_| rng.random_range(-3.0..3.0));
        let model = fit_ols(&x, &y).unwrap();
        let pred = model.predict(&x).unwrap();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for c in 0..4 {
            let dot: f64 = (0..n).map(|r| x[(r, c)] * (y[r] - pred[r])).sum();
            prop_assert!(dot.abs() <= 1e-6 * y_norm);
        }
    }

    #[test]
    fn knn_prediction_stays_in_label_range(seed in 0u64..500, k in 1usize..20) {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 50;
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |_| rng.random_range(0.0..100.0));
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let model = fit_knn(x, y, k.min(n), Weighting::Distance).unwrap();
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
        let p = model.predict_row(&q).unwrap();
        prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
    }

    #[test]
    fn metric_chain_inequality(seed in 0u64..1000) {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..100);
        let y: Array1<f64> = Array1::from_shape_fn(n, |_| rng.random_range(-50.0..150.0));
        let y_hat = Array1::from_shape_fn(n, |i| y[i] + rng.random_range(-10.0..10.0));
        let m = compute_metrics(&y, &y_hat).unwrap();
        prop_assert!(m.mae <= m.mse.sqrt() + 1e-12);
        prop_assert!(m.mse.sqrt() <= m.linf + 1e-12);
        if let Some(r2) = m.r2 {
            prop_assert!(r2 <= 1.0 + 1e-12);
        }
    }
}
