//! Small dense linear-algebra kernels shared by the solvers: Cholesky
//! factorization with escalating diagonal jitter and a cyclic Jacobi
//! eigendecomposition for symmetric matrices.

use ndarray::{Array1, Array2};

use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Returns `None` when a non-positive pivot is met.
pub fn cholesky<F: Scalar>(a: &Array2<F>) -> Option<Array2<F>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky needs a square matrix");
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum = sum - l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= F::zero() || !sum.is_finite() {
                    return None;
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the lower factor `L`.
pub fn cholesky_solve<F: Scalar>(l: &Array2<F>, b: &Array1<F>) -> Array1<F> {
    let n = l.nrows();
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum = sum - l[(i, k)] * y[k];
        }
        y[i] = sum / l[(i, i)];
    }
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum = sum - l[(k, i)] * x[k];
        }
        x[i] = sum / l[(i, i)];
    }
    x
}

/// Outcome of [`solve_spd`]; records whether stabilizing jitter was needed.
#[derive(Debug, Clone)]
pub struct SpdSolve<F> {
    pub solution: Array1<F>,
    /// Diagonal jitter that made the factorization succeed (0 if none).
    pub jitter: F,
}

/// Solves a symmetric positive-(semi)definite system via Cholesky.
///
/// On factorization failure the diagonal is inflated with escalating jitter
/// (relative to the mean diagonal magnitude) until the factorization
/// succeeds; collinear systems thus get a minimal-norm-leaning solution
/// instead of a crash.
pub fn solve_spd<F: Scalar>(a: &Array2<F>, b: &Array1<F>) -> SpdSolve<F> {
    let n = a.nrows();
    let diag_scale = {
        let mut s = F::zero();
        for i in 0..n {
            s = s + a[(i, i)].abs();
        }
        let mean = s / F::from_usize(n.max(1)).unwrap();
        if mean > F::zero() {
            mean
        } else {
            F::one()
        }
    };
    if let Some(l) = cholesky(a) {
        return SpdSolve {
            solution: cholesky_solve(&l, b),
            jitter: F::zero(),
        };
    }
    for &level in &[1e-10, 1e-8, 1e-6] {
        let jitter = diag_scale * F::c(level);
        let mut aj = a.clone();
        for i in 0..n {
            aj[(i, i)] = aj[(i, i)] + jitter;
        }
        if let Some(l) = cholesky(&aj) {
            return SpdSolve {
                solution: cholesky_solve(&l, b),
                jitter,
            };
        }
    }
    // Heavy-handed last resort: jitter large enough to dominate any deficiency.
    let jitter = diag_scale * F::c(1e-3);
    let mut aj = a.clone();
    for i in 0..n {
        aj[(i, i)] = aj[(i, i)] + jitter;
    }
    let l = cholesky(&aj).expect("heavily regularized matrix must factor");
    SpdSolve {
        solution: cholesky_solve(&l, b),
        jitter,
    }
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns eigenvalues in descending order with matching eigenvector columns.
pub fn jacobi_eigh<F: Scalar>(a: &Array2<F>) -> (Array1<F>, Array2<F>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi_eigh needs a square matrix");
    let mut m = a.clone();
    let mut v: Array2<F> = Array2::eye(n);
    let tol = F::c(1e-14)
        * (0..n)
            .map(|i| m[(i, i)].abs())
            .fold(F::one(), |acc, x| acc.max(x));

    for _sweep in 0..100 {
        let mut off = F::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() <= tol * F::c(1e-2) {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (F::c(2.0) * m[(p, q)]);
                let t = {
                    let sign = if theta >= F::zero() {
                        F::one()
                    } else {
                        -F::one()
                    };
                    sign / (theta.abs() + (theta * theta + F::one()).sqrt())
                };
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .partial_cmp(&m[(i, i)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigvals = Array1::from_iter(order.iter().map(|&i| m[(i, i)]));
    let mut eigvecs = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            eigvecs[(k, col)] = v[(k, i)];
        }
    }
    (eigvals, eigvecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.5], [0.6, 1.5, 3.8]];
        let x_true = array![1.0, -2.0, 0.5];
        let b = a.dot(&x_true);
        let solve = solve_spd(&a, &b);
        assert_eq!(solve.jitter, 0.0);
        for i in 0..3 {
            assert_abs_diff_eq!(solve.solution[i], x_true[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn singular_system_gets_jitter_not_panic() {
        // Rank-1 matrix.
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let b = array![2.0, 2.0];
        let solve = solve_spd(&a, &b);
        assert!(solve.jitter > 0.0);
        assert!(solve.solution.iter().all(|v: &f64| v.is_finite()));
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = jacobi_eigh(&a);
        assert_abs_diff_eq!(vals[0], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-10);
        // A v = λ v for each column.
        for c in 0..2 {
            let v = vecs.column(c).to_owned();
            let av = a.dot(&v);
            for k in 0..2 {
                assert_abs_diff_eq!(av[k], vals[c] * v[k], epsilon = 1e-10);
            }
        }
    }
}
