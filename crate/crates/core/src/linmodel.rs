//! Closed-form least squares: ordinary, weighted, and the thermally weighted
//! variant that additionally penalizes under-estimates through iterative
//! reweighting.

use ndarray::{linalg::general_mat_mul, Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::scalar::Scalar;

/// Affine predictor ŷ = β₀ + xᵀβ. Coefficients store the intercept first.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<F> {
    pub coefficients: Array1<F>,
    /// Diagonal jitter the normal-equation solve needed (0 for clean fits);
    /// nonzero values flag collinear feature sets.
    pub jitter: F,
}

impl<F: Scalar> LinearModel<F> {
    pub fn n_features(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn intercept(&self) -> F {
        self.coefficients[0]
    }

    /// Stored-parameter count (p + 1).
    pub fn param_count(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict_row(&self, row: &[F]) -> Result<F> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        let mut acc = self.intercept();
        for (c, &v) in row.iter().enumerate() {
            acc = acc + self.coefficients[c + 1] * v;
        }
        Ok(acc)
    }

    pub fn predict(&self, x: &Array2<F>) -> Result<Array1<F>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        let beta = self.coefficients.slice(ndarray::s![1..]).to_owned();
        let mut out = x.dot(&beta);
        out.mapv_inplace(|v| v + self.intercept());
        Ok(out)
    }
}

const GRAM_BLOCK_ROWS: usize = 16 * 1024;

/// Accumulates the intercept-augmented weighted Gram matrix and right-hand
/// side in row blocks so large designs never need a weighted copy of X.
fn weighted_normal_equations<F: Scalar>(
    x: &Array2<F>,
    y: &Array1<F>,
    weights: Option<&Array1<F>>,
) -> (Array2<F>, Array1<F>) {
    let (n, p) = (x.nrows(), x.ncols());
    let mut gram_xx: Array2<F> = Array2::zeros((p, p));
    let mut sum_wx: Array1<F> = Array1::zeros(p);
    let mut sum_wxy: Array1<F> = Array1::zeros(p);
    let mut sum_w = F::zero();
    let mut sum_wy = F::zero();

    let mut start = 0;
    while start < n {
        let end = (start + GRAM_BLOCK_ROWS).min(n);
        let rows = end - start;
        let view = x.slice(ndarray::s![start..end, ..]);
        let mut yw: Array1<F> = Array1::zeros(rows);
        let mut sw: Array1<F> = Array1::zeros(rows);
        // Rows are scaled by √w so the plain Gram of the block accumulates
        // XᵀWX; the unweighted path skips the copy entirely.
        let weighted_block = weights.map(|w| {
            let mut block = view.to_owned();
            for r in 0..rows {
                let root = w[start + r].sqrt();
                for c in 0..p {
                    block[(r, c)] = block[(r, c)] * root;
                }
            }
            block
        });
        for r in 0..rows {
            let w = weights.map_or(F::one(), |w| w[start + r]);
            sw[r] = w.sqrt();
            yw[r] = sw[r] * y[start + r];
            sum_w = sum_w + w;
            sum_wy = sum_wy + w * y[start + r];
        }
        match &weighted_block {
            Some(block) => {
                general_mat_mul(F::one(), &block.t(), block, F::one(), &mut gram_xx);
                sum_wx = sum_wx + block.t().dot(&sw);
                sum_wxy = sum_wxy + block.t().dot(&yw);
            }
            None => {
                general_mat_mul(F::one(), &view.t(), &view, F::one(), &mut gram_xx);
                sum_wx = sum_wx + view.t().dot(&sw);
                sum_wxy = sum_wxy + view.t().dot(&yw);
            }
        }
        start = end;
    }

    let mut gram = Array2::zeros((p + 1, p + 1));
    gram[(0, 0)] = sum_w;
    for c in 0..p {
        gram[(0, c + 1)] = sum_wx[c];
        gram[(c + 1, 0)] = sum_wx[c];
    }
    gram.slice_mut(ndarray::s![1.., 1..]).assign(&gram_xx);
    let mut rhs = Array1::zeros(p + 1);
    rhs[0] = sum_wy;
    rhs.slice_mut(ndarray::s![1..]).assign(&sum_wxy);
    (gram, rhs)
}

fn check_design<F: Scalar>(x: &Array2<F>, y: &Array1<F>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::invalid("empty design matrix"));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    Ok(())
}

/// Ordinary least squares through a stabilized normal-equation solve.
pub fn fit_ols<F: Scalar>(x: &Array2<F>, y: &Array1<F>) -> Result<LinearModel<F>> {
    check_design(x, y)?;
    let (gram, rhs) = weighted_normal_equations(x, y, None);
    let solved = solve_spd(&gram, &rhs);
    Ok(LinearModel {
        coefficients: solved.solution,
        jitter: solved.jitter,
    })
}

/// Weighted least squares minimizing Σ wᵢ rᵢ².
pub fn fit_wls<F: Scalar>(x: &Array2<F>, y: &Array1<F>, weights: &Array1<F>) -> Result<LinearModel<F>> {
    check_design(x, y)?;
    if weights.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| *w < F::zero() || !w.is_finite()) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    if !weights.iter().any(|w| *w > F::zero()) {
        return Err(Error::invalid("at least one weight must be positive"));
    }
    let (gram, rhs) = weighted_normal_equations(x, y, Some(weights));
    let solved = solve_spd(&gram, &rhs);
    Ok(LinearModel {
        coefficients: solved.solution,
        jitter: solved.jitter,
    })
}

/// Weighting scheme for thermally weighted least squares: observations ramp
/// linearly from `w_min` at the coldest magnet temperature to `w_max` at the
/// hottest, and rows the current fit under-estimates get `under_estimate_factor`
/// on top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalWeightConfig<F> {
    pub w_min: F,
    pub w_max: F,
    pub under_estimate_factor: F,
    pub max_irls_iterations: usize,
}

impl<F: Scalar> Default for ThermalWeightConfig<F> {
    fn default() -> Self {
        ThermalWeightConfig {
            w_min: F::c(0.33),
            w_max: F::one(),
            under_estimate_factor: F::c(10.0).sqrt(),
            max_irls_iterations: 10,
        }
    }
}

impl<F: Scalar> ThermalWeightConfig<F> {
    fn validate(&self) -> Result<()> {
        if !self.w_min.is_finite() || self.w_min <= F::zero() || self.w_max < self.w_min {
            return Err(Error::invalid("need 0 < w_min <= w_max"));
        }
        if self.under_estimate_factor < F::one() {
            return Err(Error::invalid("under_estimate_factor must be >= 1"));
        }
        if self.max_irls_iterations == 0 {
            return Err(Error::invalid("max_irls_iterations must be >= 1"));
        }
        Ok(())
    }
}

/// Linear ramp of weights over the target's observed range.
pub fn thermal_weights<F: Scalar>(y: &Array1<F>, config: &ThermalWeightConfig<F>) -> Result<Array1<F>> {
    config.validate()?;
    let lo = y.iter().cloned().fold(F::infinity(), F::min);
    let hi = y.iter().cloned().fold(F::neg_infinity(), F::max);
    if hi <= lo || !hi.is_finite() || !lo.is_finite() {
        return Err(Error::invalid(
            "thermal weights need a non-constant target range",
        ));
    }
    Ok(y.mapv(|v| config.w_min + (config.w_max - config.w_min) * (v - lo) / (hi - lo)))
}

/// Result of the iteratively reweighted thermal fit.
#[derive(Debug, Clone)]
pub struct ThermalWlsFit<F> {
    pub model: LinearModel<F>,
    /// Number of WLS solves performed.
    pub iterations: usize,
    /// True when the under-estimate index set stopped changing before the
    /// iteration cap.
    pub stable: bool,
}

/// Thermally weighted least squares with the under-estimate penalty.
///
/// The sign-dependent penalty has no closed form, so it is realized by
/// iterative reweighting: fit, multiply the weights of under-estimated rows
/// by the factor, refit, and stop once the under-estimate set repeats.
pub fn fit_wls_thermal<F: Scalar>(
    x: &Array2<F>,
    y: &Array1<F>,
    config: &ThermalWeightConfig<F>,
) -> Result<ThermalWlsFit<F>> {
    let base = thermal_weights(y, config)?;
    let mut weights = base.clone();
    let mut prev_under: Option<Vec<bool>> = None;
    let mut model = None;
    let mut iterations = 0;
    let mut stable = false;
    // Residuals below solver noise do not count as under-estimates;
    // otherwise exact fits would flip signs forever.
    let y_scale = y.iter().fold(F::one(), |a, v| a.max(v.abs()));
    let tol = F::epsilon().sqrt() * y_scale;
    for _ in 0..config.max_irls_iterations {
        let fitted = fit_wls(x, y, &weights)?;
        iterations += 1;
        let pred = fitted.predict(x)?;
        let under: Vec<bool> = pred.iter().zip(y.iter()).map(|(p, t)| *t - *p > tol).collect();
        model = Some(fitted);
        if prev_under.as_ref() == Some(&under) {
            stable = true;
            break;
        }
        for (i, &u) in under.iter().enumerate() {
            weights[i] = if u {
                base[i] * config.under_estimate_factor
            } else {
                base[i]
            };
        }
        prev_under = Some(under);
    }
    Ok(ThermalWlsFit {
        model: model.expect("at least one IRLS iteration runs"),
        iterations,
        stable,
    })
}

/// Residual column `y - ŷ`, a convenience used by the diagnostics exports.
pub fn residuals<F: Scalar>(model: &LinearModel<F>, x: &Array2<F>, y: &Array1<F>) -> Result<Array1<F>> {
    let pred = model.predict(x)?;
    Ok(y - &pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_system(n: usize, p: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y = Array1::from_shape_fn(n, |r| {
            let mut acc = 0.7 + rng.random_range(-0.05..0.05);
            for c in 0..p {
                acc += beta[c] * x[(r, c)];
            }
            acc
        });
        (x, y)
    }

    #[test]
    fn exact_line_recovers_slope() {
        let x = array![[1.0], [2.0], [3.0]];
        let y = array![2.0, 4.0, 6.0];
        let m = fit_ols(&x, &y).unwrap();
        assert_abs_diff_eq!(m.intercept(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.coefficients[1], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn constant_target_fits_intercept_only() {
        let (x, _) = random_system(50, 4, 1);
        let y = Array1::from_elem(50, 5.5);
        let m = fit_ols(&x, &y).unwrap();
        assert_abs_diff_eq!(m.intercept(), 5.5, epsilon = 1e-8);
        for c in 1..=4 {
            assert_abs_diff_eq!(m.coefficients[c], 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_columns() {
        let (x, y) = random_system(200, 10, 2);
        let m = fit_ols(&x, &y).unwrap();
        let r = residuals(&m, &x, &y).unwrap();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for c in 0..x.ncols() {
            let dot: f64 = x.column(c).iter().zip(r.iter()).map(|(a, b)| a * b).sum();
            assert!(dot.abs() <= 1e-6 * y_norm, "column {c} dot {dot}");
        }
        let sum_r: f64 = r.sum();
        assert!(sum_r.abs() <= 1e-6 * y_norm);
    }

    #[test]
    fn unit_weights_reduce_to_ols() {
        let (x, y) = random_system(120, 6, 3);
        let ols = fit_ols(&x, &y).unwrap();
        let wls = fit_wls(&x, &y, &Array1::from_elem(120, 1.0)).unwrap();
        for c in 0..ols.coefficients.len() {
            assert_abs_diff_eq!(ols.coefficients[c], wls.coefficients[c], epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_weights_remove_rows() {
        let (x, y) = random_system(80, 3, 4);
        let mut w = Array1::from_elem(80, 0.0);
        for i in 0..40 {
            w[i] = 1.0;
        }
        let wls = fit_wls(&x, &y, &w).unwrap();
        let x_sub = x.slice(ndarray::s![..40, ..]).to_owned();
        let y_sub = y.slice(ndarray::s![..40]).to_owned();
        let ols = fit_ols(&x_sub, &y_sub).unwrap();
        for c in 0..ols.coefficients.len() {
            assert_abs_diff_eq!(ols.coefficients[c], wls.coefficients[c], epsilon = 1e-8);
        }
    }

    #[test]
    fn integer_weights_match_row_replication() {
        let (x, y) = random_system(30, 3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = Array1::from_shape_fn(30, |_| rng.random_range(1..4) as f64);
        let wls = fit_wls(&x, &y, &w).unwrap();
        // Replicate each row w_i times and fit OLS.
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for r in 0..30 {
            for _ in 0..(w[r] as usize) {
                rows.push(x.row(r).to_vec());
                ys.push(y[r]);
            }
        }
        let xr = Array2::from_shape_vec((rows.len(), 3), rows.concat()).unwrap();
        let yr = Array1::from_vec(ys);
        let rep = fit_ols(&xr, &yr).unwrap();
        for c in 0..rep.coefficients.len() {
            assert_abs_diff_eq!(rep.coefficients[c], wls.coefficients[c], epsilon = 1e-8);
        }
    }

    #[test]
    fn weight_scaling_leaves_fit_unchanged() {
        let (x, y) = random_system(60, 4, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = Array1::from_shape_fn(60, |_| rng.random_range(0.1..3.0));
        let a = fit_wls(&x, &y, &w).unwrap();
        let b = fit_wls(&x, &y, &w.mapv(|v| v * 17.5)).unwrap();
        for c in 0..a.coefficients.len() {
            assert_abs_diff_eq!(a.coefficients[c], b.coefficients[c], epsilon = 1e-10);
        }
    }

    #[test]
    fn wls_rejects_degenerate_weights() {
        let (x, y) = random_system(10, 2, 9);
        assert!(fit_wls(&x, &y, &Array1::from_elem(10, 0.0)).is_err());
        assert!(fit_wls(&x, &y, &Array1::from_elem(10, -1.0)).is_err());
        assert!(fit_wls(&x, &y, &Array1::from_elem(9, 1.0)).is_err());
    }

    #[test]
    fn thermal_weights_hit_documented_endpoints() {
        let config = ThermalWeightConfig::default();
        let y = array![20.0, 60.0, 100.0];
        let w = thermal_weights(&y, &config).unwrap();
        assert_abs_diff_eq!(w[0], 0.33, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.665, epsilon = 1e-12);
        assert_abs_diff_eq!(w[2], 1.0, epsilon = 1e-12);
        assert!(thermal_weights(&array![5.0, 5.0], &config).is_err());
    }

    #[test]
    fn factor_one_is_plain_thermal_wls() {
        let (x, y) = random_system(100, 5, 10);
        let config = ThermalWeightConfig {
            under_estimate_factor: 1.0,
            ..Default::default()
        };
        let fit = fit_wls_thermal(&x, &y, &config).unwrap();
        let w = thermal_weights(&y, &config).unwrap();
        let plain = fit_wls(&x, &y, &w).unwrap();
        for c in 0..plain.coefficients.len() {
            assert_abs_diff_eq!(plain.coefficients[c], fit.model.coefficients[c], epsilon = 1e-10);
        }
    }

    #[test]
    fn exactly_fittable_data_converges_in_one_extra_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_fn((40, 3), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(40, |r| 2.0 + x[(r, 0)] - 0.5 * x[(r, 2)] + 0.1 * r as f64 * 0.0);
        let fit = fit_wls_thermal(&x, &y, &ThermalWeightConfig::default()).unwrap();
        assert!(fit.stable);
        assert_eq!(fit.iterations, 2);
    }

    #[test]
    fn thermal_fit_tightens_hot_range_against_ols() {
        // Heteroscedastic data: noise grows with the target, biased towards
        // over-shooting targets at the top of the range.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 2000;
        let x = Array2::from_shape_fn((n, 1), |_| rng.random_range(0.0..1.0));
        let y = Array1::from_shape_fn(n, |r| {
            let base = 40.0 + 60.0 * x[(r, 0)];
            let noise = rng.random_range(-1.0..1.0) * (1.0 + 8.0 * x[(r, 0)]);
            base + noise + 4.0 * x[(r, 0)] * rng.random_range(0.0..1.0)
        });
        let ols = fit_ols(&x, &y).unwrap();
        let thermal = fit_wls_thermal(&x, &y, &ThermalWeightConfig::default()).unwrap();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).unwrap());
        let top: Vec<usize> = order[n - n / 10..].to_vec();
        let mean_res = |m: &LinearModel<f64>| {
            let r = residuals(m, &x, &y).unwrap();
            top.iter().map(|&i| r[i]).sum::<f64>() / top.len() as f64
        };
        assert!(
            mean_res(&thermal.model).abs() < mean_res(&ols).abs(),
            "thermal {} vs ols {}",
            mean_res(&thermal.model),
            mean_res(&ols)
        );
    }

    #[test]
    fn irls_respects_iteration_cap() {
        let (x, y) = random_system(300, 6, 12);
        let config = ThermalWeightConfig {
            max_irls_iterations: 3,
            ..Default::default()
        };
        let fit = fit_wls_thermal(&x, &y, &config).unwrap();
        assert!(fit.iterations <= 3);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn predict_validates_width_and_matches_dot() {
        let (x, y) = random_system(50, 4, 13);
        let m = fit_ols(&x, &y).unwrap();
        assert!(m.predict(&Array2::<f64>::zeros((5, 3))).is_err());
        let zeros = Array2::<f64>::zeros((2, 4));
        let p = m.predict(&zeros).unwrap();
        assert_abs_diff_eq!(p[0], m.intercept(), epsilon = 1e-12);
        // Manual dot-product oracle on a random row.
        let row: Vec<f64> = x.row(7).to_vec();
        let mut manual = m.intercept();
        for c in 0..4 {
            manual += m.coefficients[c + 1] * row[c];
        }
        assert_abs_diff_eq!(m.predict_row(&row).unwrap(), manual, epsilon = 1e-12);
        assert_abs_diff_eq!(m.predict(&x).unwrap()[7], manual, epsilon = 1e-12);
    }
}
