//! ε-insensitive support vector regression with an RBF kernel, trained by
//! sequential two-variable updates on the dual (maximal violating pair
//! selection). The target is standardized internally so C and ε live on the
//! same scale regardless of the temperature range.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrParams<F> {
    /// Box constraint balancing flatness against tube violations.
    pub c: F,
    /// Half-width of the insensitive tube (standardized target units).
    pub epsilon: F,
    /// RBF bandwidth; `None` picks 1/(p · mean feature variance).
    pub gamma: Option<F>,
    /// KKT violation tolerance of the solver.
    pub tol: F,
    /// Cap on pair updates before the best iterate is returned as-is.
    pub max_iter: usize,
    /// Optional uniform training subsample (seeded); exact SVR on very large
    /// sets is infeasible, so benchmark runs declare the size they used.
    pub subsample: Option<usize>,
    pub seed: u64,
}

impl<F: Scalar> Default for SvrParams<F> {
    fn default() -> Self {
        SvrParams {
            c: F::one(),
            epsilon: F::c(0.1),
            gamma: None,
            tol: F::c(1e-3),
            max_iter: 200_000,
            subsample: None,
            seed: 0,
        }
    }
}

impl<F: Scalar> SvrParams<F> {
    fn validate(&self) -> Result<()> {
        if !self.c.is_finite() || self.c <= F::zero() {
            return Err(Error::invalid("C must be positive"));
        }
        if self.epsilon < F::zero() {
            return Err(Error::invalid("epsilon must be nonnegative"));
        }
        if let Some(g) = self.gamma {
            if !g.is_finite() || g <= F::zero() {
                return Err(Error::invalid("gamma must be positive"));
            }
        }
        Ok(())
    }
}

/// Gaussian kernel K(x, x') = exp(−γ‖x−x'‖²).
pub fn rbf_kernel<F: Scalar>(a: &[F], b: &[F], gamma: F) -> Result<F> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if !gamma.is_finite() || gamma <= F::zero() {
        return Err(Error::invalid("gamma must be positive"));
    }
    let mut d2 = F::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        let d = *x - *y;
        d2 = d2 + d * d;
    }
    Ok((-gamma * d2).exp())
}

/// Dense kernel matrix, used by small fits and test oracles.
pub fn rbf_gram<F: Scalar>(x: &Array2<F>, gamma: F) -> Array2<F> {
    let n = x.nrows();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[(i, i)] = F::one();
        for j in 0..i {
            let v = rbf_kernel(&x.row(i).to_vec(), &x.row(j).to_vec(), gamma).unwrap();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Dual objective ½βᵀKβ + ε‖β‖₁ − yᵀβ for complementarity-clean β.
pub fn dual_objective<F: Scalar>(k: &Array2<F>, y: &Array1<F>, beta: &Array1<F>, eps: F) -> F {
    let kb = k.dot(beta);
    let quad = beta.dot(&kb) / F::c(2.0);
    let l1: F = beta.iter().map(|b| b.abs()).sum();
    quad + eps * l1 - y.dot(beta)
}

/// Raw solver output on the (possibly standardized) problem.
#[derive(Debug, Clone)]
pub struct DualSolution<F> {
    /// β_i = α_i − α'_i per training row, each in [−C, C].
    pub beta: Array1<F>,
    pub bias: F,
    pub iterations: usize,
    pub converged: bool,
}

/// Sequential two-variable dual optimization with first-order violating-pair
/// selection. Operates on the kernel through a bounded LRU row cache.
pub fn solve_svr_dual<F: Scalar>(
    x: &Array2<F>,
    y: &Array1<F>,
    gamma: F,
    params: &SvrParams<F>,
) -> Result<DualSolution<F>> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("SVR needs at least two rows"));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let c = params.c;
    let eps = params.epsilon;
    let tol = params.tol;

    let mut cache = KernelCache::new(x, gamma, 512);
    // alpha_up[i] = α_i (pulls prediction up), alpha_dn[i] = α'_i.
    let mut alpha_up = vec![F::zero(); n];
    let mut alpha_dn = vec![F::zero(); n];
    // E_i = (Kβ)_i − y_i, maintained incrementally from β = 0.
    let mut e: Vec<F> = (0..n).map(|i| -y[i]).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        // Virtual variable t < n is α_t (sign +1), t ≥ n is α'_{t−n} (−1).
        // v_t = −s_t·∇_t = −E − s·ε; the violating pair maximizes v over
        // movable-up vars and minimizes it over movable-down vars.
        let mut m_up = F::neg_infinity();
        let mut m_low = F::infinity();
        let mut i_up = usize::MAX;
        let mut i_low = usize::MAX;
        for p in 0..n {
            let v_plus = -e[p] - eps;
            let v_minus = -e[p] + eps;
            if alpha_up[p] < c && v_plus > m_up {
                m_up = v_plus;
                i_up = p;
            }
            if alpha_dn[p] > F::zero() && v_minus > m_up {
                m_up = v_minus;
                i_up = p + n;
            }
            if alpha_up[p] > F::zero() && v_plus < m_low {
                m_low = v_plus;
                i_low = p;
            }
            if alpha_dn[p] < c && v_minus < m_low {
                m_low = v_minus;
                i_low = p + n;
            }
        }
        if i_up == usize::MAX || i_low == usize::MAX || m_up - m_low <= tol {
            converged = true;
            break;
        }

        let (pi, si) = split_var::<F>(i_up, n);
        let (pj, sj) = split_var::<F>(i_low, n);
        let k_i = cache.row(pi);
        let kij = k_i[pj];
        let eta = (F::c(2.0) - F::c(2.0) * kij).max(F::c(1e-12));

        // Gradients of the two chosen virtual variables.
        let g_i = si * e[pi] + eps;
        let g_j = sj * e[pj] + eps;
        // Direction: a_i += δ, a_j −= s_i·s_j·δ keeps Σ s·a = 0.
        let ss = si * sj;
        let mut delta = -(g_i - ss * g_j) / eta;

        // Box clipping for both endpoints.
        let (ai, aj) = (get_alpha(&alpha_up, &alpha_dn, i_up, n), get_alpha(&alpha_up, &alpha_dn, i_low, n));
        let (lo_i, hi_i) = (-ai, c - ai);
        delta = delta.max(lo_i).min(hi_i);
        // a_j_new = aj − ss·δ ∈ [0, C].
        if ss > F::zero() {
            delta = delta.max(aj - c).min(aj);
        } else {
            delta = delta.max(-aj).min(c - aj);
        }
        if delta == F::zero() {
            // Numerically stuck pair; treat as converged at tolerance.
            converged = m_up - m_low <= tol;
            break;
        }

        set_alpha(&mut alpha_up, &mut alpha_dn, i_up, n, ai + delta);
        set_alpha(&mut alpha_up, &mut alpha_dn, i_low, n, aj - ss * delta);

        // β changes by s_i·δ at point pi and −s_i·δ at point pj.
        let dbi = si * delta;
        let k_i = cache.row(pi).to_vec();
        let k_j = cache.row(pj).to_vec();
        for t in 0..n {
            e[t] = e[t] + dbi * (k_i[t] - k_j[t]);
        }
        iterations += 1;
    }

    // Complementarity cleanup: shrinking both α and α' by their minimum
    // preserves β and never increases the objective.
    for p in 0..n {
        let shared = alpha_up[p].min(alpha_dn[p]);
        alpha_up[p] = alpha_up[p] - shared;
        alpha_dn[p] = alpha_dn[p] - shared;
    }
    let beta = Array1::from_shape_fn(n, |p| alpha_up[p] - alpha_dn[p]);

    // Bias from free variables; midpoint of the violation interval otherwise.
    let mut free_sum = F::zero();
    let mut free_count = 0usize;
    for p in 0..n {
        if alpha_up[p] > F::zero() && alpha_up[p] < c {
            free_sum = free_sum + (-e[p] - eps);
            free_count += 1;
        }
        if alpha_dn[p] > F::zero() && alpha_dn[p] < c {
            free_sum = free_sum + (-e[p] + eps);
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / F::from_usize(free_count).unwrap()
    } else {
        let mut m_up = F::neg_infinity();
        let mut m_low = F::infinity();
        for p in 0..n {
            let v_plus = -e[p] - eps;
            let v_minus = -e[p] + eps;
            if alpha_up[p] < c {
                m_up = m_up.max(v_plus);
            }
            if alpha_dn[p] > F::zero() {
                m_up = m_up.max(v_minus);
            }
            if alpha_up[p] > F::zero() {
                m_low = m_low.min(v_plus);
            }
            if alpha_dn[p] < c {
                m_low = m_low.min(v_minus);
            }
        }
        (m_up + m_low) / F::c(2.0)
    };

    Ok(DualSolution {
        beta,
        bias,
        iterations,
        converged,
    })
}

fn split_var<F: Scalar>(t: usize, n: usize) -> (usize, F) {
    if t < n {
        (t, F::one())
    } else {
        (t - n, -F::one())
    }
}

fn get_alpha<F: Scalar>(up: &[F], dn: &[F], t: usize, n: usize) -> F {
    if t < n {
        up[t]
    } else {
        dn[t - n]
    }
}

fn set_alpha<F: Scalar>(up: &mut [F], dn: &mut [F], t: usize, n: usize, v: F) {
    if t < n {
        up[t] = v;
    } else {
        dn[t - n] = v;
    }
}

/// LRU cache of kernel rows; avoids the dense Gram matrix on larger fits.
struct KernelCache<'a, F> {
    x: &'a Array2<F>,
    gamma: F,
    sq_norms: Vec<F>,
    rows: HashMap<usize, Vec<F>>,
    lru: Vec<usize>,
    capacity: usize,
}

impl<'a, F: Scalar> KernelCache<'a, F> {
    fn new(x: &'a Array2<F>, gamma: F, capacity: usize) -> Self {
        let sq_norms = (0..x.nrows())
            .map(|r| x.row(r).iter().map(|v| *v * *v).sum())
            .collect();
        KernelCache {
            x,
            gamma,
            sq_norms,
            rows: HashMap::new(),
            lru: Vec::new(),
            capacity,
        }
    }

    fn row(&mut self, i: usize) -> &[F] {
        if !self.rows.contains_key(&i) {
            if self.rows.len() >= self.capacity {
                let evict = self.lru.remove(0);
                self.rows.remove(&evict);
            }
            let xi = self.x.row(i).to_owned();
            let dots = self.x.dot(&xi);
            let ni = self.sq_norms[i];
            let row: Vec<F> = (0..self.x.nrows())
                .map(|j| {
                    let d2 = (ni + self.sq_norms[j] - F::c(2.0) * dots[j]).max(F::zero());
                    (-self.gamma * d2).exp()
                })
                .collect();
            self.rows.insert(i, row);
            self.lru.push(i);
        } else {
            let pos = self.lru.iter().position(|&t| t == i).unwrap();
            self.lru.remove(pos);
            self.lru.push(i);
        }
        self.rows.get(&i).unwrap()
    }
}

/// Trained predictor: support vectors, their dual weights, and the bias.
/// `y_mean`/`y_scale` restore predictions to target units.
#[derive(Debug, Clone)]
pub struct SvrModel<F> {
    pub support_vectors: Array2<F>,
    /// (α_i − α'_i) per support vector, in [−C, C].
    pub dual_coefs: Array1<F>,
    pub bias: F,
    pub gamma: F,
    pub y_mean: F,
    pub y_scale: F,
    pub converged: bool,
    pub iterations: usize,
    pub params: SvrParams<F>,
}

/// Scale heuristic for the RBF bandwidth: 1/(p · mean column variance).
pub fn gamma_scale<F: Scalar>(x: &Array2<F>) -> F {
    let n = F::from_usize(x.nrows().max(1)).unwrap();
    let p = x.ncols().max(1);
    let mut var_sum = F::zero();
    for c in 0..p {
        let col = x.column(c);
        let mean = col.iter().fold(F::zero(), |a, &v| a + v) / n;
        let var = col.iter().fold(F::zero(), |a, &v| a + (v - mean) * (v - mean)) / n;
        var_sum = var_sum + var;
    }
    let mean_var = var_sum / F::from_usize(p).unwrap();
    if mean_var > F::zero() {
        F::one() / (F::from_usize(p).unwrap() * mean_var)
    } else {
        F::one() / F::from_usize(p).unwrap()
    }
}

pub fn fit_svr<F: Scalar>(x: &Array2<F>, y: &Array1<F>, params: &SvrParams<F>) -> Result<SvrModel<F>> {
    params.validate()?;
    if x.nrows() < 2 {
        return Err(Error::invalid("SVR needs at least two rows"));
    }

    // Optional seeded uniform subsample.
    let (x_fit, y_fit) = match params.subsample {
        Some(m) if m < x.nrows() => {
            if m < 2 {
                return Err(Error::invalid("subsample must keep at least two rows"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            let mut pool: Vec<usize> = (0..x.nrows()).collect();
            for i in 0..m {
                let j = rng.random_range(i..pool.len());
                pool.swap(i, j);
            }
            let mut idx = pool[..m].to_vec();
            idx.sort_unstable();
            let mut xs = Array2::zeros((m, x.ncols()));
            let mut ys = Array1::zeros(m);
            for (out, &r) in idx.iter().enumerate() {
                xs.row_mut(out).assign(&x.row(r));
                ys[out] = y[r];
            }
            (xs, ys)
        }
        _ => (x.to_owned(), y.to_owned()),
    };

    let n = x_fit.nrows();
    let n_f = F::from_usize(n).unwrap();
    let y_mean = y_fit.sum() / n_f;
    let y_var = y_fit.iter().fold(F::zero(), |a, &v| a + (v - y_mean) * (v - y_mean)) / n_f;
    let y_scale = if y_var > F::zero() { y_var.sqrt() } else { F::one() };
    let y_std = y_fit.mapv(|v| (v - y_mean) / y_scale);

    let gamma = params.gamma.unwrap_or_else(|| gamma_scale(&x_fit));
    let solution = solve_svr_dual(&x_fit, &y_std, gamma, params)?;

    // Keep only rows with nonzero dual weight.
    let keep: Vec<usize> = (0..n)
        .filter(|&i| solution.beta[i].abs() > F::zero())
        .collect();
    let mut support_vectors = Array2::zeros((keep.len(), x_fit.ncols()));
    let mut dual_coefs = Array1::zeros(keep.len());
    for (out, &i) in keep.iter().enumerate() {
        support_vectors.row_mut(out).assign(&x_fit.row(i));
        dual_coefs[out] = solution.beta[i];
    }

    Ok(SvrModel {
        support_vectors,
        dual_coefs,
        bias: solution.bias,
        gamma,
        y_mean,
        y_scale,
        converged: solution.converged,
        iterations: solution.iterations,
        params: *params,
    })
}

impl<F: Scalar> SvrModel<F> {
    pub fn n_support(&self) -> usize {
        self.dual_coefs.len()
    }

    pub fn n_features(&self) -> usize {
        self.support_vectors.ncols()
    }

    /// Effective constant prediction when the kernel expansion is empty.
    pub fn effective_bias(&self) -> F {
        self.y_mean + self.y_scale * self.bias
    }

    /// Stored-parameter count M·(p+1) + 1.
    pub fn param_count(&self) -> usize {
        self.n_support() * (self.n_features() + 1) + 1
    }

    pub fn predict_row(&self, row: &[F]) -> Result<F> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        let mut acc = self.bias;
        for (i, coef) in self.dual_coefs.iter().enumerate() {
            let k = rbf_kernel(&self.support_vectors.row(i).to_vec(), row, self.gamma)?;
            acc = acc + *coef * k;
        }
        Ok(self.y_mean + self.y_scale * acc)
    }

    pub fn predict(&self, x: &Array2<F>) -> Result<Array1<F>> {
        let mut out = Array1::zeros(x.nrows());
        for r in 0..x.nrows() {
            out[r] = self.predict_row(&x.row(r).to_vec())?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn rbf_kernel_closed_forms() {
        let a = vec![1.0, 2.0, 3.0];
        assert_abs_diff_eq!(rbf_kernel(&a, &a, 0.7).unwrap(), 1.0, epsilon = 1e-15);
        let far = vec![100.0, -100.0, 100.0];
        assert!(rbf_kernel(&a, &far, 0.7).unwrap() < 1e-300);
        // γ=1 and ‖x−x'‖² = ln 2 → K = 0.5.
        let b = vec![1.0 + (2.0f64).ln().sqrt(), 2.0, 3.0];
        assert_abs_diff_eq!(rbf_kernel(&a, &b, 1.0).unwrap(), 0.5, epsilon = 1e-12);
        assert!(rbf_kernel(&a, &[1.0, 2.0], 1.0).is_err());
        assert!(rbf_kernel(&a, &a, 0.0).is_err());
    }

    #[test]
    fn constant_target_needs_no_support_vectors() {
        let mut r = rng(1);
        let x: Array2<f64> = Array2::from_shape_fn((30, 2), |_| r.random_range(-1.0..1.0));
        let y = Array1::from_elem(30, 42.5);
        let model = fit_svr(&x, &y, &SvrParams::default()).unwrap();
        assert_eq!(model.n_support(), 0);
        assert_abs_diff_eq!(model.effective_bias(), 42.5, epsilon = 1e-9);
        let pred = model.predict(&x).unwrap();
        for p in pred.iter() {
            assert_abs_diff_eq!(*p, 42.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn points_inside_tube_have_zero_weight() {
        let mut r = rng(2);
        let x: Array2<f64> = Array2::from_shape_fn((60, 1), |_| r.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(60, |i| x[(i, 0)] + 0.02 * r.random_range(-1.0..1.0));
        let params = SvrParams {
            c: 10.0,
            epsilon: 0.2,
            tol: 1e-4,
            ..Default::default()
        };
        let model = fit_svr(&x, &y, &params).unwrap();
        assert!(model.converged);
        // The support set is exactly the rows whose |standardized residual|
        // reaches the tube edge (up to solver tolerance).
        let pred = model.predict(&x).unwrap();
        let mut sv_rows = 0;
        for i in 0..60 {
            let res_std = (y[i] - pred[i]).abs() / model.y_scale;
            let is_sv = model
                .support_vectors
                .rows()
                .into_iter()
                .any(|s| s[0] == x[(i, 0)]);
            if is_sv {
                sv_rows += 1;
                assert!(
                    res_std >= params.epsilon - 10.0 * params.tol,
                    "sv {i} strictly inside tube: {res_std}"
                );
            } else {
                assert!(
                    res_std <= params.epsilon + 10.0 * params.tol,
                    "non-sv {i} outside tube: {res_std}"
                );
            }
        }
        assert!(sv_rows < 60, "everything became a support vector");
    }

    #[test]
    fn box_constraints_and_slackness_hold() {
        let mut r = rng(3);
        let x: Array2<f64> = Array2::from_shape_fn((50, 2), |_| r.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(50, |i| (2.0 * x[(i, 0)]).sin() + x[(i, 1)]);
        let params = SvrParams {
            c: 2.0,
            epsilon: 0.1,
            tol: 1e-4,
            ..Default::default()
        };
        let model = fit_svr(&x, &y, &params).unwrap();
        for b in model.dual_coefs.iter() {
            assert!(b.abs() <= params.c + 1e-6);
            assert!(b.abs() > 0.0);
        }
        // Equality constraint Σβ = 0.
        let sum: f64 = model.dual_coefs.iter().sum();
        assert!(sum.abs() <= 1e-6 * params.c * model.n_support().max(1) as f64);
    }

    #[test]
    fn widening_the_tube_never_adds_support_vectors() {
        let mut r = rng(4);
        let x: Array2<f64> = Array2::from_shape_fn((80, 1), |_| r.random_range(-3.0..3.0));
        let y = Array1::from_shape_fn(80, |i| x[(i, 0)].sin() + 0.1 * r.random_range(-1.0..1.0));
        let mut prev = usize::MAX;
        for eps in [0.05, 0.1, 0.2, 0.4] {
            let params = SvrParams {
                c: 5.0,
                epsilon: eps,
                tol: 1e-4,
                ..Default::default()
            };
            let model = fit_svr(&x, &y, &params).unwrap();
            assert!(model.n_support() <= prev, "eps {eps} grew the SV set");
            prev = model.n_support();
        }
    }

    #[test]
    fn prediction_matches_manual_expansion() {
        let mut r = rng(5);
        let x: Array2<f64> = Array2::from_shape_fn((40, 2), |_| r.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(40, |i| x[(i, 0)] * x[(i, 1)] + 0.3 * x[(i, 0)]);
        let model = fit_svr(&x, &y, &SvrParams::default()).unwrap();
        let q = [0.25, -0.75];
        let mut acc = model.bias;
        for (i, coef) in model.dual_coefs.iter().enumerate() {
            acc += coef * rbf_kernel(&model.support_vectors.row(i).to_vec(), &q, model.gamma).unwrap();
        }
        let manual = model.y_mean + model.y_scale * acc;
        assert_abs_diff_eq!(model.predict_row(&q).unwrap(), manual, epsilon = 1e-12);
    }

    #[test]
    fn hard_fit_keeps_training_points_in_tube() {
        let mut r = rng(6);
        let x: Array2<f64> = Array2::from_shape_fn((25, 1), |_| r.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(25, |i| x[(i, 0)] * 2.0);
        let params = SvrParams {
            c: 100.0,
            epsilon: 0.05,
            tol: 1e-5,
            ..Default::default()
        };
        let model = fit_svr(&x, &y, &params).unwrap();
        assert!(model.converged);
        let pred = model.predict(&x).unwrap();
        for i in 0..25 {
            let res_std = (y[i] - pred[i]).abs() / model.y_scale;
            assert!(
                res_std <= params.epsilon + 1e-3,
                "row {i} outside tube: {res_std}"
            );
        }
    }

    #[test]
    fn subsample_is_seeded_and_bounded() {
        let mut r = rng(7);
        let x: Array2<f64> = Array2::from_shape_fn((200, 2), |_| r.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(200, |i| x[(i, 0)]);
        let params = SvrParams {
            subsample: Some(50),
            seed: 9,
            ..Default::default()
        };
        let a = fit_svr(&x, &y, &params).unwrap();
        let b = fit_svr(&x, &y, &params).unwrap();
        assert!(a.n_support() <= 50);
        assert_eq!(a.dual_coefs.len(), b.dual_coefs.len());
        for (u, v) in a.dual_coefs.iter().zip(b.dual_coefs.iter()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }
}
