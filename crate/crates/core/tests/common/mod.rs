//! Independent oracles for the acceptance suite. Everything here recomputes
//! results through a different algorithmic route than the library code it
//! checks: direct-form filters, an SVD pseudo-inverse, a projected-gradient
//! QP, exhaustive scans.

#![allow(dead_code)]

use ndarray::{Array1, Array2};

/// Direct finite-window exponentially weighted mean and standard deviation:
/// weights (1−α)^i over lags i = 0..=t, Σw-normalized at every step.
pub fn direct_ew(xs: &[f64], alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len();
    let mut means = Vec::with_capacity(n);
    let mut stds = Vec::with_capacity(n);
    let decay = 1.0 - alpha;
    for t in 0..n {
        let mut w = 1.0;
        let mut w_sum = 0.0;
        let mut m = 0.0;
        for j in (0..=t).rev() {
            w_sum += w;
            m += w * xs[j];
            w *= decay;
        }
        let mean = m / w_sum;
        let mut w = 1.0;
        let mut v = 0.0;
        for j in (0..=t).rev() {
            v += w * (xs[j] - mean) * (xs[j] - mean);
            w *= decay;
        }
        means.push(mean);
        stds.push((v / w_sum).sqrt());
    }
    (means, stds)
}

/// Least-squares solve through a one-sided Jacobi SVD pseudo-inverse,
/// independent of the normal-equation/Cholesky route.
pub fn pinv_least_squares(a: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut u = a.clone();
    let mut v: Array2<f64> = Array2::eye(n);

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut aii = 0.0;
                let mut ajj = 0.0;
                let mut aij = 0.0;
                for r in 0..m {
                    aii += u[(r, i)] * u[(r, i)];
                    ajj += u[(r, j)] * u[(r, j)];
                    aij += u[(r, i)] * u[(r, j)];
                }
                off = off.max(aij.abs() / (aii * ajj).sqrt().max(1e-300));
                if aij.abs() <= 1e-14 * (aii * ajj).sqrt() {
                    continue;
                }
                let tau = (ajj - aii) / (2.0 * aij);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..m {
                    let ui = u[(r, i)];
                    let uj = u[(r, j)];
                    u[(r, i)] = c * ui - s * uj;
                    u[(r, j)] = s * ui + c * uj;
                }
                for r in 0..n {
                    let vi = v[(r, i)];
                    let vj = v[(r, j)];
                    v[(r, i)] = c * vi - s * vj;
                    v[(r, j)] = s * vi + c * vj;
                }
            }
        }
        if off < 1e-14 {
            break;
        }
    }

    // Singular values are the column norms of the rotated matrix.
    let mut sigma = vec![0.0f64; n];
    for j in 0..n {
        sigma[j] = (0..m).map(|r| u[(r, j)] * u[(r, j)]).sum::<f64>().sqrt();
    }
    let s_max = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = s_max * 1e-12;

    // β = V Σ⁺ Uᵀ y with U the normalized columns.
    let mut beta = Array1::zeros(n);
    for j in 0..n {
        if sigma[j] <= cutoff {
            continue;
        }
        let mut uty = 0.0;
        for r in 0..m {
            uty += u[(r, j)] / sigma[j] * y[r];
        }
        let coefficient = uty / sigma[j];
        for r in 0..n {
            beta[r] += v[(r, j)] * coefficient;
        }
    }
    beta
}

/// Dense-QP reference for the ε-SVR dual, solved by projected gradient with
/// the box/equality projection done by bisection.
///
/// Variables a = (α, α') ∈ [0, C]^{2n} with signs s = (+1…, −1…); the
/// objective is ½βᵀKβ + εΣa − yᵀβ with β = α − α'.
pub fn svr_qp_oracle(
    k: &Array2<f64>,
    y: &Array1<f64>,
    c: f64,
    eps: f64,
    iterations: usize,
) -> (Array1<f64>, f64) {
    let n = y.len();
    let mut a = vec![0.0f64; 2 * n];

    // Conservative step from the Gershgorin bound of the extended Hessian.
    let row_sum_max = (0..n)
        .map(|i| (0..n).map(|j| k[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / (2.0 * row_sum_max.max(1e-12));

    for _ in 0..iterations {
        // β and gradient.
        let beta: Vec<f64> = (0..n).map(|i| a[i] - a[n + i]).collect();
        let mut kb = vec![0.0f64; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += k[(i, j)] * beta[j];
            }
            kb[i] = acc;
        }
        let mut grad = vec![0.0f64; 2 * n];
        for i in 0..n {
            grad[i] = kb[i] + eps - y[i];
            grad[n + i] = -kb[i] + eps + y[i];
        }
        for t in 0..2 * n {
            a[t] -= step * grad[t];
        }
        project_box_hyperplane(&mut a, n, c);
    }

    let beta = Array1::from_shape_fn(n, |i| a[i] - a[n + i]);
    let obj = dual_objective_raw(k, y, &a, eps, n);
    (beta, obj)
}

/// ½βᵀKβ + εΣ(α+α') − yᵀβ on the raw 2n variables.
fn dual_objective_raw(k: &Array2<f64>, y: &Array1<f64>, a: &[f64], eps: f64, n: usize) -> f64 {
    let beta: Vec<f64> = (0..n).map(|i| a[i] - a[n + i]).collect();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * k[(i, j)] * beta[j];
        }
    }
    let slack: f64 = a.iter().sum();
    let lin: f64 = (0..n).map(|i| y[i] * beta[i]).sum();
    0.5 * quad + eps * slack - lin
}

/// Euclidean projection onto {a ∈ [0,C]^{2n} : Σ s·a = 0} via bisection on
/// the shift multiplier: h(λ) = Σ s·clip(a − λ·s) is monotone in λ.
fn project_box_hyperplane(a: &mut [f64], n: usize, c: f64) {
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let h = |lambda: f64, a: &[f64]| -> f64 {
        let mut sum = 0.0;
        for (t, &v) in a.iter().enumerate() {
            let s = sign(t);
            sum += s * (v - lambda * s).clamp(0.0, c);
        }
        sum
    };
    let bound = c + a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())) + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid, a) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    for (t, v) in a.iter_mut().enumerate() {
        let s = sign(t);
        *v = (*v - lambda * s).clamp(0.0, c);
    }
}

/// Exhaustive k-NN with the documented tie rule: (distance, lexicographic
/// features, label). Combines neighbors in sorted order.
pub fn brute_knn(
    x: &Array2<f64>,
    y: &Array1<f64>,
    query: &[f64],
    k: usize,
    distance_weighted: bool,
) -> f64 {
    let n = x.nrows();
    let mut candidates: Vec<(f64, usize)> = (0..n)
        .map(|r| {
            let d2: f64 = (0..x.ncols()).map(|c| (x[(r, c)] - query[c]).powi(2)).sum();
            (d2, r)
        })
        .collect();
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).unwrap().then_with(|| {
            for c in 0..x.ncols() {
                match x[(a.1, c)].partial_cmp(&x[(b.1, c)]).unwrap() {
                    std::cmp::Ordering::Equal => continue,
                    other => return other,
                }
            }
            y[a.1].partial_cmp(&y[b.1]).unwrap()
        })
    });
    let selected = &candidates[..k];
    if distance_weighted {
        let zeros: Vec<usize> = selected.iter().filter(|(d, _)| *d == 0.0).map(|&(_, r)| r).collect();
        if !zeros.is_empty() {
            return zeros.iter().map(|&r| y[r]).sum::<f64>() / zeros.len() as f64;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for &(d2, r) in selected {
            let w = 1.0 / d2.sqrt();
            num += w * y[r];
            den += w;
        }
        num / den
    } else {
        selected.iter().map(|&(_, r)| y[r]).sum::<f64>() / k as f64
    }
}

/// Manual node-walk over a flattened tree.
pub fn walk_tree(tree: &rotortemp::forest::Tree<f64>, row: &[f64]) -> f64 {
    let mut idx = 0usize;
    loop {
        let node = &tree.nodes[idx];
        if node.feature < 0 {
            return node.value;
        }
        idx = if row[node.feature as usize] <= node.threshold {
            node.left as usize
        } else {
            node.right as usize
        };
    }
}

/// Branin function (three global minima) on x1 ∈ [−5, 10], x2 ∈ [0, 15].
pub fn branin(x1: f64, x2: f64) -> f64 {
    let a = 1.0;
    let b = 5.1 / (4.0 * std::f64::consts::PI.powi(2));
    let c = 5.0 / std::f64::consts::PI;
    let r = 6.0;
    let s = 10.0;
    let t = 1.0 / (8.0 * std::f64::consts::PI);
    a * (x2 - b * x1 * x1 + c * x1 - r).powi(2) + s * (1.0 - t) * x1.cos() + s
}

/// Dense-grid estimate of the Branin global minimum.
pub fn branin_grid_minimum(resolution: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..=resolution {
        let x1 = -5.0 + 15.0 * i as f64 / resolution as f64;
        for j in 0..=resolution {
            let x2 = 15.0 * j as f64 / resolution as f64;
            best = best.min(branin(x1, x2));
        }
    }
    best
}
