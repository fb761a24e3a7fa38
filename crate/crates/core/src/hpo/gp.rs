//! Exact Gaussian-process regression on the encoded hyperparameter cube:
//! Matérn-5/2 kernel with per-dimension length scales, hyperparameters set
//! by maximizing the marginal likelihood with a multi-start pattern search.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperParams<F> {
    pub signal_variance: F,
    pub length_scales: Vec<F>,
    pub noise: F,
}

/// Matérn 5/2 with anisotropic scaling.
fn kernel<F: Scalar>(a: &[F], b: &[F], hp: &GpHyperParams<F>) -> F {
    let mut r2 = F::zero();
    for d in 0..a.len() {
        let s = (a[d] - b[d]) / hp.length_scales[d];
        r2 = r2 + s * s;
    }
    let r = r2.sqrt();
    let sqrt5 = F::c(5.0f64.sqrt());
    let t = sqrt5 * r;
    hp.signal_variance * (F::one() + t + t * t / F::c(3.0)) * (-t).exp()
}

/// Conditioned surrogate with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct GpSurrogate<F> {
    x: Vec<Vec<F>>,
    pub hp: GpHyperParams<F>,
    y_mean: F,
    chol: Array2<F>,
    alpha: Array1<F>,
}

impl<F: Scalar> GpSurrogate<F> {
    /// Conditions on (x, y) with fixed hyperparameters. Escalates diagonal
    /// jitter when the covariance is numerically indefinite.
    pub fn with_hyperparams(
        x: Vec<Vec<F>>,
        y: &Array1<F>,
        hp: GpHyperParams<F>,
    ) -> Result<Self> {
        let n = x.len();
        if n < 2 {
            return Err(Error::invalid("GP needs at least two observations"));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        let noise = hp.noise.max(F::c(1e-10));
        let y_mean = y.sum() / F::from_usize(n).unwrap();
        let centered = y.mapv(|v| v - y_mean);

        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v = kernel(&x[i], &x[j], &hp);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        for jitter_exp in 0..6 {
            let jitter = noise + hp.signal_variance * F::c(1e-12) * F::c(10.0f64.powi(jitter_exp));
            let mut kj = k.clone();
            for i in 0..n {
                kj[(i, i)] = kj[(i, i)] + jitter;
            }
            if let Some(l) = cholesky(&kj) {
                let alpha = cholesky_solve(&l, &centered);
                return Ok(GpSurrogate {
                    x,
                    hp,
                    y_mean,
                    chol: l,
                    alpha,
                });
            }
        }
        Err(Error::invalid("GP covariance stayed indefinite under jitter"))
    }

    pub fn n_conditioned(&self) -> usize {
        self.x.len()
    }

    /// Posterior mean and standard deviation at a query point.
    pub fn posterior(&self, q: &[F]) -> (F, F) {
        let n = self.x.len();
        let k_star = Array1::from_shape_fn(n, |i| kernel(&self.x[i], q, &self.hp));
        let mean = self.y_mean + k_star.dot(&self.alpha);
        // v = L⁻¹ k*; var = k(q,q) − vᵀv.
        let mut v = Array1::zeros(n);
        for i in 0..n {
            let mut sum = k_star[i];
            for j in 0..i {
                sum = sum - self.chol[(i, j)] * v[j];
            }
            v[i] = sum / self.chol[(i, i)];
        }
        let var = (self.hp.signal_variance - v.dot(&v)).max(F::zero());
        (mean, var.sqrt())
    }
}

/// Log marginal likelihood of the data under the kernel hyperparameters.
pub fn log_marginal_likelihood<F: Scalar>(
    x: &[Vec<F>],
    y: &Array1<F>,
    hp: &GpHyperParams<F>,
) -> Option<F> {
    let n = x.len();
    let y_mean = y.sum() / F::from_usize(n).unwrap();
    let centered = y.mapv(|v| v - y_mean);
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let v = kernel(&x[i], &x[j], hp);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] = k[(i, i)] + hp.noise.max(F::c(1e-10));
    }
    let l = cholesky(&k)?;
    let alpha = cholesky_solve(&l, &centered);
    let mut log_det = F::zero();
    for i in 0..n {
        log_det = log_det + l[(i, i)].ln();
    }
    let n_f = F::from_usize(n).unwrap();
    Some(
        -centered.dot(&alpha) / F::c(2.0)
            - log_det
            - n_f / F::c(2.0) * F::c((2.0 * std::f64::consts::PI).ln()),
    )
}

/// ML-II hyperparameter selection: multi-start coordinate pattern search on
/// the log-parameter vector.
pub fn gp_fit<F: Scalar>(x: Vec<Vec<F>>, y: &Array1<F>) -> Result<GpSurrogate<F>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("GP needs at least two successful trials"));
    }
    let d = x[0].len();
    let n_f = F::from_usize(n).unwrap();
    let y_mean = y.sum() / n_f;
    let y_var = y
        .iter()
        .fold(F::zero(), |a, v| a + (*v - y_mean) * (*v - y_mean))
        / n_f;
    let y_var = y_var.max(F::c(1e-8));

    // θ = [ln σ², ln ℓ_1.., ln noise].
    let starts: Vec<Vec<F>> = vec![
        {
            let mut t = vec![y_var.ln()];
            t.extend(vec![F::c(0.5f64.ln()); d]);
            t.push((y_var * F::c(1e-4)).ln());
            t
        },
        {
            let mut t = vec![y_var.ln()];
            t.extend(vec![F::c(0.1f64.ln()); d]);
            t.push((y_var * F::c(1e-2)).ln());
            t
        },
    ];

    let unpack = |theta: &[F]| GpHyperParams {
        signal_variance: theta[0].exp(),
        length_scales: theta[1..=d].iter().map(|t| t.exp()).collect(),
        noise: theta[d + 1].exp(),
    };
    let eval = |theta: &[F]| log_marginal_likelihood(&x, y, &unpack(theta));

    let mut best_theta = starts[0].clone();
    let mut best_lml = F::neg_infinity();
    for start in starts {
        let mut theta = start;
        let mut current = match eval(&theta) {
            Some(v) => v,
            None => continue,
        };
        let mut step = F::c(1.0);
        for _round in 0..12 {
            let mut improved = false;
            for k in 0..theta.len() {
                for dir in [F::one(), -F::one()] {
                    let mut cand = theta.clone();
                    cand[k] = (cand[k] + dir * step).max(F::c(-18.0)).min(F::c(12.0));
                    if let Some(v) = eval(&cand) {
                        if v > current {
                            current = v;
                            theta = cand;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step = step / F::c(2.0);
                if step < F::c(1e-2) {
                    break;
                }
            }
        }
        if current > best_lml {
            best_lml = current;
            best_theta = theta;
        }
    }
    GpSurrogate::with_hyperparams(x, y, unpack(&best_theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    /// Expected improvement.
    Ei,
    /// Probability of improvement.
    Pi,
    /// Upper confidence bound (lower bound in minimization form).
    Ucb,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 3] =
        [AcquisitionKind::Ei, AcquisitionKind::Pi, AcquisitionKind::Ucb];
}

/// Standard normal density.
fn pdf<F: Scalar>(z: F) -> F {
    (-z * z / F::c(2.0)).exp() / F::c((2.0 * std::f64::consts::PI).sqrt())
}

/// Standard normal CDF via an erfc approximation (|error| < 1.2e-7).
pub fn normal_cdf<F: Scalar>(z: F) -> F {
    F::one() - erfc_positive(z / F::c(2.0f64.sqrt())) / F::c(2.0)
}

fn erfc_positive<F: Scalar>(x: F) -> F {
    // Numerical-Recipes Chebyshev fit of erfc on z ≥ 0, reflected for z < 0.
    let z = x.abs();
    let t = F::one() / (F::one() + z / F::c(2.0));
    let poly = -z * z - F::c(1.26551223)
        + t * (F::c(1.00002368)
            + t * (F::c(0.37409196)
                + t * (F::c(0.09678418)
                    + t * (F::c(-0.18628806)
                        + t * (F::c(0.27886807)
                            + t * (F::c(-1.13520398)
                                + t * (F::c(1.48851587)
                                    + t * (F::c(-0.82215223) + t * F::c(0.17087277)))))))));
    let val = t * poly.exp();
    if x >= F::zero() {
        val
    } else {
        F::c(2.0) - val
    }
}

/// Acquisition score for MINIMIZATION; larger is more promising. σ = 0 is
/// handled by the deterministic limit.
pub fn acquisition<F: Scalar>(mean: F, std: F, best: F, kind: AcquisitionKind, ucb_kappa: F) -> F {
    match kind {
        AcquisitionKind::Ei => {
            if std <= F::zero() {
                (best - mean).max(F::zero())
            } else {
                let z = (best - mean) / std;
                std * (z * normal_cdf(z) + pdf(z))
            }
        }
        AcquisitionKind::Pi => {
            if std <= F::zero() {
                if mean < best {
                    F::one()
                } else {
                    F::zero()
                }
            } else {
                normal_cdf((best - mean) / std)
            }
        }
        AcquisitionKind::Ucb => ucb_kappa * std - mean,
    }
}
