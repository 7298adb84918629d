use super::matrix::Matrix;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Symmetric eigendecomposition `s = Q · diag(λ) · Qᵀ` by cyclic Jacobi.
///
/// Eigenvalues are returned in ascending order with matching columns of `Q`.
pub fn sym_eig(s: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    if !s.is_square() {
        return Err(Error::validation(format!(
            "eigendecomposition needs a square matrix, got {:?}",
            s.shape()
        )));
    }
    let scale = s.max_abs().max(1.0);
    if s.asymmetry() > SYMMETRY_TOL * scale {
        return Err(Error::validation(format!(
            "matrix is not symmetric (asymmetry {:e})",
            s.asymmetry()
        )));
    }
    let n = s.rows();
    // Symmetrize exactly; the tolerance above already bounds the change.
    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mut q = Matrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
        if off <= f64::EPSILON * f64::EPSILON * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apr = a[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                // A <- Jᵀ A J on rows/cols p, r.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = c * akp - sn * akr;
                    a[(k, r)] = sn * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = c * apk - sn * ark;
                    a[(r, k)] = sn * apk + c * ark;
                }
                a[(p, r)] = 0.0;
                a[(r, p)] = 0.0;
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = c * qkp - sn * qkr;
                    q[(k, r)] = sn * qkp + c * qkr;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, k| q[(i, order[k])]);
    Ok((vectors, values))
}

/// `Q · diag(values) · Qᵀ`.
pub fn compose_spectral(q: &Matrix, values: &[f64]) -> Matrix {
    let n = q.rows();
    let mut out = Matrix::zeros(n, n);
    for (k, &lam) in values.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        for i in 0..n {
            let qi = q[(i, k)] * lam;
            if qi == 0.0 {
                continue;
            }
            for j in i..n {
                out[(i, j)] += qi * q[(j, k)];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            out[(i, j)] = out[(j, i)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_eigenvalues() {
        let (_, vals) = sym_eig(&Matrix::from_diag(&[4.0, 9.0])).unwrap();
        assert_eq!(vals, vec![4.0, 9.0]);
    }

    #[test]
    fn two_by_two() {
        let s = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let (q, vals) = sym_eig(&s).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-15);
        assert!((vals[1] - 3.0).abs() < 1e-15);
        let back = compose_spectral(&q, &vals);
        assert!(back.sub(&s).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn rejects_asymmetric() {
        let s = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&s), Err(Error::Validation(_))));
        assert!(sym_eig(&Matrix::zeros(2, 3)).is_err());
    }
}
