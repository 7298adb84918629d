//! Inverse p-th roots of symmetric positive semi-definite matrices.

use serde::{Deserialize, Serialize};

use super::eig::{compose_spectral, sym_eig};
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Eigenvalues below `-NEGATIVE_TOL * max(1, λ_max)` mean the input is not PSD.
const NEGATIVE_TOL: f64 = 1e-8;
/// With `epsilon == 0`, eigenvalues at or below this fraction of `λ_max` are
/// numerically zero and are left out of the root (pseudo-inverse semantics).
const NULL_SPACE_TOL: f64 = 1e-12;
const SINGULAR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InverseRootBackend {
    #[default]
    /// `Q · diag((λ + ε)^(-1/p)) · Qᵀ` from a Jacobi eigendecomposition.
    Eigen,
    /// Coupled Newton iteration; needs a nonsingular `s + εI`.
    Newton { max_iter: usize, tol: f64 },
}

impl InverseRootBackend {
    pub fn newton() -> Self {
        InverseRootBackend::Newton {
            max_iter: 200,
            tol: 1e-13,
        }
    }

    pub fn inverse_root(&self, s: &Matrix, p: u32, epsilon: f64) -> Result<Matrix> {
        match *self {
            InverseRootBackend::Eigen => spd_inverse_root(s, p, epsilon),
            InverseRootBackend::Newton { max_iter, tol } => {
                spd_inverse_root_newton(s, p, epsilon, max_iter, tol)
            }
        }
    }
}

fn check_args(p: u32, epsilon: f64) -> Result<()> {
    if p == 0 {
        return Err(Error::validation("root order p must be positive"));
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::validation(format!(
            "epsilon must be finite and >= 0, got {epsilon}"
        )));
    }
    Ok(())
}

/// `(s + εI)^(-1/p)` through the eigendecomposition of `s`.
pub fn spd_inverse_root(s: &Matrix, p: u32, epsilon: f64) -> Result<Matrix> {
    check_args(p, epsilon)?;
    let (q, lambdas) = sym_eig(s)?;
    let lambda_max = lambdas.last().copied().unwrap_or(0.0);
    let lambda_min = lambdas.first().copied().unwrap_or(0.0);
    if lambda_min < -NEGATIVE_TOL * lambda_max.max(1.0) {
        return Err(Error::NotPsd {
            min_eigenvalue: lambda_min,
        });
    }
    if epsilon == 0.0 && lambda_max < SINGULAR_FLOOR {
        return Err(Error::Singular);
    }
    let exponent = -1.0 / f64::from(p);
    let cutoff = NULL_SPACE_TOL * lambda_max;
    let mapped: Vec<f64> = lambdas
        .iter()
        .map(|&lam| {
            let lam = lam.max(0.0);
            if epsilon == 0.0 {
                if lam <= cutoff {
                    0.0
                } else {
                    lam.powf(exponent)
                }
            } else {
                (lam + epsilon).powf(exponent)
            }
        })
        .collect();
    Ok(compose_spectral(&q, &mapped))
}

/// `(s + εI)^(-1/p)` by the coupled Newton iteration
/// `X ← X·((p+1)I − M)/p`, `M ← (((p+1)I − M)/p)^p · M`,
/// started from `X₀ = I/c`, `M₀ = (s + εI)/c^p` with `c^p = ‖s + εI‖_F`.
pub fn spd_inverse_root_newton(
    s: &Matrix,
    p: u32,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<Matrix> {
    check_args(p, epsilon)?;
    if !s.is_square() || !s.is_symmetric(1e-10 * s.max_abs().max(1.0)) {
        return Err(Error::validation("inverse root needs a symmetric matrix"));
    }
    let n = s.rows();
    let mut a = s.clone();
    for i in 0..n {
        a[(i, i)] += epsilon;
    }
    let norm = a.frobenius_norm();
    if norm < SINGULAR_FLOOR {
        return Err(Error::Singular);
    }
    let pf = f64::from(p);
    let c = norm.powf(1.0 / pf);
    let mut x = Matrix::identity(n).scale(1.0 / c);
    let mut m = a.scale(1.0 / norm);
    let eye = Matrix::identity(n);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        residual = m.sub(&eye)?.frobenius_norm();
        if residual <= tol {
            return Ok(symmetrize(&x));
        }
        if !residual.is_finite() {
            break;
        }
        let step = Matrix::from_fn(n, n, |i, j| {
            let id = if i == j { pf + 1.0 } else { 0.0 };
            (id - m[(i, j)]) / pf
        });
        x = x.matmul(&step)?;
        let mut step_pow = step.clone();
        for _ in 1..p {
            step_pow = step_pow.matmul(&step)?;
        }
        m = step_pow.matmul(&m)?;
    }
    // Either stalled (singular input) or ran out of iterations.
    if residual.is_finite() && residual < 1e-6 {
        return Ok(symmetrize(&x));
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        estimate: residual,
    })
}

fn symmetrize(x: &Matrix) -> Matrix {
    Matrix::from_fn(x.rows(), x.cols(), |i, j| 0.5 * (x[(i, j)] + x[(j, i)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.sub(b).unwrap().frobenius_norm() <= tol
    }

    #[test]
    fn diagonal_fourth_root() {
        let r = spd_inverse_root(&Matrix::from_diag(&[16.0, 81.0]), 4, 0.0).unwrap();
        assert!(close(&r, &Matrix::from_diag(&[0.5, 1.0 / 3.0]), 1e-15));
    }

    #[test]
    fn identity_is_fixed() {
        for p in 1..=5 {
            let r = spd_inverse_root(&Matrix::identity(3), p, 0.0).unwrap();
            assert!(close(&r, &Matrix::identity(3), 1e-15));
        }
    }

    #[test]
    fn errors() {
        let neg = Matrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(
            spd_inverse_root(&neg, 2, 0.0),
            Err(Error::NotPsd { .. })
        ));
        assert_eq!(
            spd_inverse_root(&Matrix::zeros(2, 2), 2, 0.0),
            Err(Error::Singular)
        );
        // Regularized zero matrix is fine: ε^(-1/p) I.
        let r = spd_inverse_root(&Matrix::zeros(2, 2), 2, 4.0).unwrap();
        assert!(close(&r, &Matrix::identity(2).scale(0.5), 1e-15));
        assert!(spd_inverse_root(&Matrix::identity(2), 0, 0.0).is_err());
        assert!(spd_inverse_root(&Matrix::identity(2), 2, -1.0).is_err());
    }

    #[test]
    fn newton_matches_eigen_on_diagonal() {
        let s = Matrix::from_diag(&[16.0, 81.0, 1.0]);
        let a = spd_inverse_root(&s, 4, 0.0).unwrap();
        let b = InverseRootBackend::newton().inverse_root(&s, 4, 0.0).unwrap();
        assert!(close(&a, &b, 1e-12));
    }

    #[test]
    fn newton_rejects_zero() {
        assert_eq!(
            spd_inverse_root_newton(&Matrix::zeros(2, 2), 2, 0.0, 50, 1e-12),
            Err(Error::Singular)
        );
    }
}
