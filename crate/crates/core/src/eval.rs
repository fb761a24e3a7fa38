//! Scoring and experiment machinery: the metric bundle, stratified group
//! 3-fold cross-validation over recording sessions, learn-curve sweeps and a
//! 2-component PCA projection for data inspection.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::{build_features, FeatureMatrix, Scaler, SpanSet};
use crate::linalg::jacobi_eigh;
use crate::model::ModelSpec;
use crate::scalar::Scalar;

/// Score bundle: MSE (°C²), MAE (°C), R² and the worst-case deviation ℓ∞
/// (°C). R² is `None` when the target is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics<F> {
    pub mse: F,
    pub mae: F,
    pub r2: Option<F>,
    pub linf: F,
}

pub fn compute_metrics<F: Scalar>(y: &Array1<F>, y_hat: &Array1<F>) -> Result<Metrics<F>> {
    if y.len() != y_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::invalid("metrics need at least one sample"));
    }
    let n = F::from_usize(y.len()).unwrap();
    let mut sq = F::zero();
    let mut abs = F::zero();
    let mut linf = F::zero();
    for (t, p) in y.iter().zip(y_hat.iter()) {
        let r = *t - *p;
        sq = sq + r * r;
        abs = abs + r.abs();
        linf = linf.max(r.abs());
    }
    let mse = sq / n;
    let mae = abs / n;
    let mean = y.sum() / n;
    let ss_tot = y.iter().fold(F::zero(), |a, v| a + (*v - mean) * (*v - mean));
    let r2 = if ss_tot > F::zero() {
        Some(F::one() - sq / ss_tot)
    } else {
        None
    };
    Ok(Metrics { mse, mae, r2, linf })
}

/// Assignment of profiles to folds plus the stratification level of each
/// profile (quartile of its maximum magnet temperature).
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub folds: Vec<Vec<String>>,
    pub levels: HashMap<String, usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Checks the partition property against a profile id set.
    pub fn validate(&self, profile_ids: &[&str]) -> Result<()> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for fold in &self.folds {
            for id in fold {
                *seen.entry(id.as_str()).or_insert(0) += 1;
            }
        }
        for id in profile_ids {
            match seen.get(id) {
                Some(1) => {}
                Some(_) => {
                    return Err(Error::invalid(format!(
                        "profile `{id}` appears in more than one fold"
                    )))
                }
                None => {
                    return Err(Error::invalid(format!("profile `{id}` missing from plan")))
                }
            }
        }
        if seen.len() != profile_ids.len() {
            return Err(Error::invalid("plan names profiles absent from the dataset"));
        }
        Ok(())
    }

    /// Per-fold histogram of stratification levels.
    pub fn level_histograms(&self) -> Vec<HashMap<usize, usize>> {
        self.folds
            .iter()
            .map(|fold| {
                let mut h = HashMap::new();
                for id in fold {
                    *h.entry(self.levels[id]).or_insert(0) += 1;
                }
                h
            })
            .collect()
    }
}

const N_STRATA: usize = 4;

/// Stratified group fold assignment: profiles are binned into quartile
/// levels of their max ϑ_PM, then greedily dealt to folds balancing the
/// level count first and the total sample count second. Deterministic per
/// seed (the seed shuffles within levels).
pub fn make_fold_plan<F: Scalar>(dataset: &Dataset<F>, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid("need at least two folds"));
    }
    let profiles = dataset.profiles();
    if profiles.len() < k {
        return Err(Error::invalid(format!(
            "need at least {k} profiles for {k} folds, have {}",
            profiles.len()
        )));
    }

    // Rank profiles by max pm; quartile levels from the rank.
    let mut stats: Vec<(String, f64, usize)> = profiles
        .iter()
        .map(|span| {
            let max_pm = dataset.samples()[span.start..span.end]
                .iter()
                .map(|s| s.pm.to_f64_lossy())
                .fold(f64::NEG_INFINITY, f64::max);
            (span.id.clone(), max_pm, span.len())
        })
        .collect();
    stats.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    let n = stats.len();
    let mut levels: HashMap<String, usize> = HashMap::new();
    let mut by_level: Vec<Vec<(String, usize)>> = vec![Vec::new(); N_STRATA];
    for (rank, (id, _, rows)) in stats.iter().enumerate() {
        let level = (N_STRATA * rank / n).min(N_STRATA - 1);
        levels.insert(id.clone(), level);
        by_level[level].push((id.clone(), *rows));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<String>> = vec![Vec::new(); k];
    let mut fold_rows = vec![0usize; k];
    let mut fold_level_counts: Vec<Vec<usize>> = vec![vec![0; N_STRATA]; k];
    for (level, members) in by_level.iter_mut().enumerate() {
        for i in (1..members.len()).rev() {
            let j = rng.random_range(0..=i);
            members.swap(i, j);
        }
        for (id, rows) in members.iter() {
            let target = (0..k)
                .min_by_key(|&f| (fold_level_counts[f][level], fold_rows[f], f))
                .unwrap();
            folds[target].push(id.clone());
            fold_rows[target] += rows;
            fold_level_counts[target][level] += 1;
        }
    }
    Ok(FoldPlan { folds, levels })
}

/// One fold's outcome plus the scaler provenance, so leakage can be audited.
#[derive(Debug, Clone)]
pub struct CvFold<F> {
    pub held_out: Vec<String>,
    pub metrics: Metrics<F>,
    pub scaler_fit_rows: usize,
    pub dropped_features: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CvResult<F> {
    pub folds: Vec<CvFold<F>>,
    /// The hyperparameter-search objective.
    pub mean_mse: F,
}

/// Per fold: standardization fitted on the training folds only, model fitted
/// there, metrics on the held-out fold.
pub fn cross_validate<F: Scalar>(
    spec: &ModelSpec<F>,
    dataset: &Dataset<F>,
    spans: SpanSet,
    plan: &FoldPlan,
    seed: u64,
) -> Result<CvResult<F>> {
    let ids = dataset.profile_ids();
    plan.validate(&ids)?;
    let features = build_features(dataset, spans)?;

    let mut folds = Vec::with_capacity(plan.k());
    let mut mse_sum = F::zero();
    for held_out in &plan.folds {
        let train_ids: Vec<String> = ids
            .iter()
            .filter(|id| !held_out.iter().any(|h| h == *id))
            .map(|s| s.to_string())
            .collect();
        let fold = fit_and_score(spec, &features, &train_ids, held_out, seed)?;
        mse_sum = mse_sum + fold.metrics.mse;
        folds.push(fold);
    }
    let mean_mse = mse_sum / F::from_usize(plan.k()).unwrap();
    Ok(CvResult { folds, mean_mse })
}

/// Shared fit/evaluate step over named profile subsets of a prebuilt
/// feature matrix.
fn fit_and_score<F: Scalar>(
    spec: &ModelSpec<F>,
    features: &FeatureMatrix<F>,
    train_ids: &[String],
    test_ids: &[String],
    seed: u64,
) -> Result<CvFold<F>> {
    let train_rows = features.rows_for(train_ids);
    let test_rows = features.rows_for(test_ids);
    if train_rows.is_empty() || test_rows.is_empty() {
        return Err(Error::invalid("fold with empty train or test side"));
    }
    let (x_train_raw, y_train) = features.gather(&train_rows);
    let scaler = Scaler::fit(&x_train_raw, &features.names)?;
    let x_train = scaler.transform(&x_train_raw);
    drop(x_train_raw);
    let train_profiles = features.profiles_for(train_ids);

    let model = spec.fit(&x_train, &y_train, &train_profiles, seed)?;

    let (x_test_raw, y_test) = features.gather(&test_rows);
    let x_test = scaler.transform(&x_test_raw);
    let y_hat = model.predict(&x_test)?;
    let metrics = compute_metrics(&y_test, &y_hat)?;
    Ok(CvFold {
        held_out: test_ids.to_vec(),
        metrics,
        scaler_fit_rows: scaler.n_fit_rows,
        dropped_features: scaler.dropped,
    })
}

/// Mean/σ of the test MSE at one training-set fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnPoint<F> {
    pub fraction: F,
    pub mean_mse: F,
    pub std_mse: F,
    pub repeats_used: usize,
}

/// Learn-curve sweep: per fraction, `repeats` seeded subsets of whole
/// training profiles are fitted and scored on the constant test set.
/// Fractions that cannot fit a single profile are skipped.
pub fn learn_curve<F: Scalar>(
    spec: &ModelSpec<F>,
    train: &Dataset<F>,
    test: &Dataset<F>,
    spans: SpanSet,
    fractions: &[F],
    repeats: usize,
    seed: u64,
) -> Result<Vec<LearnPoint<F>>> {
    if repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    for f in fractions {
        if !(*f > F::zero() && *f <= F::one()) {
            return Err(Error::invalid("fractions must lie in (0, 1]"));
        }
    }
    let train_features = build_features(train, spans)?;
    let test_features = build_features(test, spans)?;
    let total_rows = train_features.n_rows();
    let all_ids: Vec<String> = train.profile_ids().iter().map(|s| s.to_string()).collect();

    let mut points = Vec::new();
    for &fraction in fractions {
        let target_rows = (fraction.to_f64_lossy() * total_rows as f64).round() as usize;
        let mut mses: Vec<F> = Vec::new();
        for repeat in 0..repeats {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(repeat as u64);
            let mut order: Vec<usize> = (0..all_ids.len()).collect();
            for i in (1..order.len()).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
            // Whole profiles only, never exceeding the row budget.
            let mut chosen: Vec<String> = Vec::new();
            let mut rows = 0usize;
            for &p in &order {
                let len = train.profiles()[p].len();
                if rows + len <= target_rows {
                    chosen.push(all_ids[p].clone());
                    rows += len;
                }
            }
            if chosen.is_empty() {
                continue;
            }
            let train_rows = train_features.rows_for(&chosen);
            let (x_train_raw, y_train) = train_features.gather(&train_rows);
            let scaler = Scaler::fit(&x_train_raw, &train_features.names)?;
            let x_train = scaler.transform(&x_train_raw);
            let train_profiles = train_features.profiles_for(&chosen);
            let model = spec.fit(&x_train, &y_train, &train_profiles, seed)?;
            let x_test = scaler.transform(&test_features.x);
            let y_hat = model.predict(&x_test)?;
            let m = compute_metrics(&test_features.y, &y_hat)?;
            mses.push(m.mse);
        }
        if mses.is_empty() {
            continue; // skipped fraction; caller sees the gap
        }
        let n = F::from_usize(mses.len()).unwrap();
        let mean = mses.iter().fold(F::zero(), |a, v| a + *v) / n;
        let var = mses
            .iter()
            .fold(F::zero(), |a, v| a + (*v - mean) * (*v - mean))
            / n;
        points.push(LearnPoint {
            fraction,
            mean_mse: mean,
            std_mse: var.max(F::zero()).sqrt(),
            repeats_used: mses.len(),
        });
    }
    Ok(points)
}

/// Principal-component projection of (centered) feature rows.
#[derive(Debug, Clone)]
pub struct PcaProjection<F> {
    /// n × components scores.
    pub projected: Array2<F>,
    /// Fraction of total variance captured per component.
    pub explained_variance: Vec<F>,
    /// p × components loading matrix.
    pub components: Array2<F>,
}

pub fn pca_project<F: Scalar>(x: &Array2<F>, components: usize) -> Result<PcaProjection<F>> {
    let (n, p) = (x.nrows(), x.ncols());
    if components == 0 || components > p {
        return Err(Error::invalid(format!(
            "components must lie in 1..={p} (got {components})"
        )));
    }
    if n <= components {
        return Err(Error::invalid("need more rows than components"));
    }
    let n_f = F::from_usize(n).unwrap();
    let means = Array1::from_shape_fn(p, |c| {
        x.column(c).iter().fold(F::zero(), |a, v| a + *v) / n_f
    });
    let mut centered = x.to_owned();
    for r in 0..n {
        for c in 0..p {
            centered[(r, c)] = centered[(r, c)] - means[c];
        }
    }
    let cov = centered.t().dot(&centered).mapv(|v| v / n_f);
    let (eigvals, eigvecs) = jacobi_eigh(&cov);
    let total: F = eigvals.iter().map(|v| v.max(F::zero())).sum();

    let mut loadings = Array2::zeros((p, components));
    let mut explained = Vec::with_capacity(components);
    for cidx in 0..components {
        let mut col = eigvecs.column(cidx).to_owned();
        // Sign convention: the largest-magnitude loading is positive.
        let mut max_abs = F::zero();
        let mut max_val = F::zero();
        for v in col.iter() {
            if v.abs() > max_abs {
                max_abs = v.abs();
                max_val = *v;
            }
        }
        if max_val < F::zero() {
            col.mapv_inplace(|v| -v);
        }
        loadings.column_mut(cidx).assign(&col);
        let frac = if total > F::zero() {
            eigvals[cidx].max(F::zero()) / total
        } else {
            F::zero()
        };
        explained.push(frac);
    }
    let projected = centered.dot(&loadings);
    Ok(PcaProjection {
        projected,
        explained_variance: explained,
        components: loadings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, RawSample, SyntheticConfig};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn perfect_prediction_scores_perfectly() {
        let y = array![1.0, 2.0, 3.0];
        let m = compute_metrics(&y, &y.clone()).unwrap();
        assert_eq!((m.mse, m.mae, m.linf), (0.0, 0.0, 0.0));
        assert_abs_diff_eq!(m.r2.unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mean_prediction_has_zero_r2() {
        let y = array![1.0, 2.0, 3.0, 6.0];
        let mean = y.sum() / 4.0;
        let y_hat = Array1::from_elem(4, mean);
        let m = compute_metrics(&y, &y_hat).unwrap();
        assert_abs_diff_eq!(m.r2.unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_target_flags_undefined_r2() {
        let y = array![2.0, 2.0, 2.0];
        let m = compute_metrics(&y, &array![2.0, 2.1, 1.9]).unwrap();
        assert!(m.r2.is_none());
        assert!(compute_metrics(&y, &array![1.0]).is_err());
    }

    #[test]
    fn metric_inequalities_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let n = rng.random_range(5..50);
            let y: Array1<f64> = Array1::from_shape_fn(n, |_| rng.random_range(-10.0..110.0));
            let y_hat = Array1::from_shape_fn(n, |i| y[i] + rng.random_range(-5.0..5.0));
            let m = compute_metrics(&y, &y_hat).unwrap();
            assert!(m.mae <= m.mse.sqrt() + 1e-12);
            assert!(m.mse.sqrt() <= m.linf + 1e-12);
        }
    }

    fn profile(id: &str, n: usize, pm_max: f64) -> Vec<RawSample<f64>> {
        (0..n)
            .map(|i| RawSample {
                ambient: 25.0,
                coolant: 30.0,
                u_d: i as f64 * 0.01,
                u_q: 1.0,
                i_d: -1.0,
                i_q: 1.0,
                motor_speed: 1000.0,
                pm: pm_max - 5.0 + 5.0 * (i as f64 / n as f64),
                profile_id: id.to_string(),
            })
            .collect()
    }

    #[test]
    fn three_profiles_three_folds_one_each() {
        let mut rows = Vec::new();
        rows.extend(profile("a", 10, 40.0));
        rows.extend(profile("b", 10, 60.0));
        rows.extend(profile("c", 10, 80.0));
        let ds = Dataset::from_samples(rows, 2.0).unwrap();
        let plan = make_fold_plan(&ds, 3, 0).unwrap();
        for fold in &plan.folds {
            assert_eq!(fold.len(), 1);
        }
        plan.validate(&ds.profile_ids()).unwrap();
    }

    #[test]
    fn hot_and_cold_profiles_spread_evenly() {
        let mut rows = Vec::new();
        for (i, max) in [40.0, 41.0, 42.0, 90.0, 91.0, 92.0].iter().enumerate() {
            rows.extend(profile(&format!("p{i}"), 20, *max));
        }
        let ds = Dataset::from_samples(rows, 2.0).unwrap();
        for seed in 0..5 {
            let plan = make_fold_plan(&ds, 3, seed).unwrap();
            for fold in &plan.folds {
                assert_eq!(fold.len(), 2);
                let max_levels: Vec<usize> = fold.iter().map(|id| plan.levels[id]).collect();
                // One from the cold half (levels 0-1), one hot (levels 2-3).
                assert_eq!(
                    max_levels.iter().filter(|&&l| l <= 1).count(),
                    1,
                    "seed {seed}: fold {fold:?} levels {max_levels:?}"
                );
            }
        }
    }

    #[test]
    fn level_histograms_balanced_within_one() {
        let mut rows = Vec::new();
        for i in 0..12 {
            rows.extend(profile(&format!("p{i}"), 15 + i, 40.0 + 5.0 * i as f64));
        }
        let ds = Dataset::from_samples(rows, 2.0).unwrap();
        let plan = make_fold_plan(&ds, 3, 42).unwrap();
        let hists = plan.level_histograms();
        for level in 0..4 {
            let counts: Vec<usize> = hists.iter().map(|h| *h.get(&level).unwrap_or(&0)).collect();
            let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
            assert!(spread <= 1, "level {level} counts {counts:?}");
        }
    }

    #[test]
    fn too_few_profiles_is_an_error() {
        let rows = profile("only", 30, 50.0);
        let ds = Dataset::from_samples(rows, 2.0).unwrap();
        assert!(make_fold_plan(&ds, 3, 0).is_err());
    }

    #[test]
    fn leaked_plan_is_rejected() {
        let mut rows = Vec::new();
        rows.extend(profile("a", 10, 40.0));
        rows.extend(profile("b", 10, 60.0));
        rows.extend(profile("c", 10, 80.0));
        let ds = Dataset::from_samples(rows, 2.0).unwrap();
        let bad = FoldPlan {
            folds: vec![
                vec!["a".into(), "b".into()],
                vec!["b".into()],
                vec!["c".into()],
            ],
            levels: HashMap::new(),
        };
        let spans = SpanSet::new([2, 4, 8, 16]).unwrap();
        let err = cross_validate(&ModelSpec::<f64>::Ols, &ds, spans, &bad, 0);
        assert!(err.is_err());
    }

    #[test]
    fn cv_scaler_never_sees_held_out_rows() {
        let config = SyntheticConfig::<f64> {
            duration_s: 240.0,
            n_profiles: 6,
            ..Default::default()
        };
        let ds = generate_synthetic(&config, 5).unwrap();
        let spans = SpanSet::new([4, 16, 64, 256]).unwrap();
        let plan = make_fold_plan(&ds, 3, 1).unwrap();
        let result = cross_validate(&ModelSpec::<f64>::Ols, &ds, spans, &plan, 0).unwrap();
        let rows_per_profile = ds.len() / 6;
        for fold in &result.folds {
            let expected_train = ds.len() - fold.held_out.len() * rows_per_profile;
            assert_eq!(fold.scaler_fit_rows, expected_train);
        }
        assert!(result.mean_mse.is_finite());
    }

    #[test]
    fn constant_target_cv_is_trivially_solved() {
        // Zero excitation + equal boundary temperatures: pm is constant, OLS
        // nails it; the fold metric must be ~0.
        let config = SyntheticConfig::<f64> {
            excitation: 0.0,
            coolant_c: 25.0,
            duration_s: 120.0,
            n_profiles: 3,
            ..Default::default()
        };
        let ds = generate_synthetic(&config, 2).unwrap();
        let spans = SpanSet::new([2, 4, 8, 16]).unwrap();
        let plan = make_fold_plan(&ds, 3, 0).unwrap();
        let result = cross_validate(&ModelSpec::<f64>::Ols, &ds, spans, &plan, 0).unwrap();
        assert!(result.mean_mse < 1e-12, "mean MSE {}", result.mean_mse);
    }

    #[test]
    fn cv_mean_mse_tracks_a_direct_split() {
        let config = SyntheticConfig::<f64> {
            time_constants_s: [20.0, 8.0],
            duration_s: 400.0,
            n_profiles: 6,
            hold_range_s: [10.0, 60.0],
            start_at_steady_state: true,
            ..Default::default()
        };
        let ds = generate_synthetic(&config, 13).unwrap();
        let spans = SpanSet::new([8, 31, 79, 200]).unwrap();
        let plan = make_fold_plan(&ds, 3, 0).unwrap();
        let cv = cross_validate(&ModelSpec::<f64>::Ols, &ds, spans, &plan, 0).unwrap();

        // Direct comparison: hold out the last profile instead.
        let test_id = ds.profile_ids().last().unwrap().to_string();
        let (train, test) = ds.split_profiles(std::slice::from_ref(&test_id)).unwrap();
        let trf = build_features(&train, spans).unwrap();
        let tef = build_features(&test, spans).unwrap();
        let scaler = Scaler::fit(&trf.x, &trf.names).unwrap();
        let model = ModelSpec::<f64>::Ols
            .fit(&scaler.transform(&trf.x), &trf.y, &trf.profiles, 0)
            .unwrap();
        let split_mse = compute_metrics(&tef.y, &model.predict(&scaler.transform(&tef.x)).unwrap())
            .unwrap()
            .mse;
        let ratio = cv.mean_mse / split_mse;
        assert!(
            (0.5..=2.0).contains(&ratio),
            "cv {} vs split {split_mse} (ratio {ratio})",
            cv.mean_mse
        );
    }

    #[test]
    fn learn_curve_full_fraction_has_zero_std() {
        let config = SyntheticConfig::<f64> {
            duration_s: 300.0,
            n_profiles: 4,
            ..Default::default()
        };
        let train = generate_synthetic(&config, 3).unwrap();
        let test = generate_synthetic(&config, 4).unwrap();
        let spans = SpanSet::new([4, 16, 64, 256]).unwrap();
        let points = learn_curve(
            &ModelSpec::<f64>::Ols,
            &train,
            &test,
            spans,
            &[1.0],
            5,
            0,
        )
        .unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].repeats_used, 5);
        assert_abs_diff_eq!(points[0].std_mse, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn learn_curve_skips_impossible_fractions() {
        let config = SyntheticConfig::<f64> {
            duration_s: 300.0,
            n_profiles: 2,
            ..Default::default()
        };
        let train = generate_synthetic(&config, 3).unwrap();
        let test = generate_synthetic(&config, 4).unwrap();
        let spans = SpanSet::new([4, 16, 64, 256]).unwrap();
        // 10% of rows cannot hold a whole profile (profiles are 50% each).
        let points = learn_curve(&ModelSpec::<f64>::Ols, &train, &test, spans, &[0.1, 1.0], 3, 0)
            .unwrap();
        assert_eq!(points.len(), 1);
        assert_abs_diff_eq!(points[0].fraction, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn pca_recovers_axis_aligned_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // Variance 25 on axis 0, variance 1 on axis 1.
        let x: Array2<f64> = Array2::from_shape_fn((300, 2), |(_, c)| {
            if c == 0 {
                rng.random_range(-5.0..5.0)
            } else {
                rng.random_range(-1.0..1.0)
            }
        });
        let pca = pca_project(&x, 2).unwrap();
        // First component is ±e0 with the sign convention making it +e0.
        assert!(pca.components[(0, 0)] > 0.99);
        assert!(pca.components[(1, 0)].abs() < 0.1);
        let sum: f64 = pca.explained_variance.iter().sum();
        assert!(sum <= 1.0 + 1e-12);
        assert!(pca.explained_variance[0] > pca.explained_variance[1]);
        assert!(pca_project(&x, 3).is_err());
    }

    #[test]
    fn pca_projection_matches_direct_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = Array2::from_shape_fn((80, 5), |_| rng.random_range(-2.0..2.0));
        let pca = pca_project(&x, 5).unwrap();
        // Full-rank projection reconstructs the centered data.
        let recon = pca.projected.dot(&pca.components.t());
        let n = 80.0;
        let means: Vec<f64> = (0..5)
            .map(|c| x.column(c).iter().sum::<f64>() / n)
            .collect();
        for r in 0..80 {
            for c in 0..5 {
                assert_abs_diff_eq!(recon[(r, c)], x[(r, c)] - means[c], epsilon = 1e-8);
            }
        }
    }
}
