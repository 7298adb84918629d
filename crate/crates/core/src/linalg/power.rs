use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

const START_SEED: u64 = 0x5eed_0f90_3e12;

/// Largest singular value by power iteration on the smaller Gram matrix.
///
/// Stops once the eigen-residual `‖Bv − μv‖` of the Gram matrix `B` falls
/// below `tol · μ`. The Rayleigh quotient never overestimates `σ_max²`.
pub fn spectral_norm(m: &Matrix, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::validation(format!("tolerance must be positive, got {tol}")));
    }
    if m.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let gram = if m.rows() <= m.cols() {
        m.gram_rows()
    } else {
        m.gram_cols()
    };
    let n = gram.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    normalize(&mut v);

    let mut best = 0.0_f64;
    for _ in 0..max_iter {
        let w = sym_matvec(&gram, &v);
        let mu = dot(&v, &w);
        best = best.max(mu);
        let residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - mu * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol * mu {
            return Ok(mu.max(0.0).sqrt());
        }
        v = w;
        if normalize(&mut v) == 0.0 {
            // Start vector landed in the null space; nothing left to amplify.
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        estimate: best.max(0.0).sqrt(),
    })
}

fn sym_matvec(a: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..a.rows()).map(|i| dot(a.row(i), v)).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal() {
        let s = spectral_norm(&Matrix::from_diag(&[3.0, 1.0]), 1e-12, 1000).unwrap();
        assert!((s - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_is_isometry() {
        let (c, s) = (0.3_f64.cos(), 0.3_f64.sin());
        let q = Matrix::from_rows(&[[c, -s], [s, c]]).unwrap();
        let n = spectral_norm(&q, 1e-12, 1000).unwrap();
        assert!((n - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_and_bad_tol() {
        assert_eq!(spectral_norm(&Matrix::zeros(2, 2), 1e-6, 10), Err(Error::ZeroMatrix));
        assert!(spectral_norm(&Matrix::identity(2), 0.0, 10).is_err());
    }

    #[test]
    fn reports_best_estimate_on_budget_exhaustion() {
        // Nearly degenerate top pair converges slowly.
        let m = Matrix::from_diag(&[1.0, 0.999_999, 0.5]);
        match spectral_norm(&m, 1e-15, 3) {
            Err(Error::NoConvergence { iterations, estimate }) => {
                assert_eq!(iterations, 3);
                assert!(estimate > 0.5 && estimate <= 1.0 + 1e-15);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }
}
