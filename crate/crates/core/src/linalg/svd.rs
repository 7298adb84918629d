//! Reduced singular value decomposition by one-sided (Hestenes) Jacobi.
//!
//! The input is orthogonalized column-by-column with plane rotations until
//! every pair of columns is numerically orthogonal. Column norms are then the
//! singular values. Accurate to roughly machine precision relative to each
//! singular value, which is what the small dense matrices in this crate need.

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Singular values below `RANK_TOLERANCE * sigma_max` are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;
const ORTHOGONALITY_TOL: f64 = 1e-15;

/// Reduced SVD `g = u · diag(sigma) · vᵀ` keeping only nonzero singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    /// m x r, orthonormal columns.
    pub u: Matrix,
    /// Length r, sorted descending, all positive.
    pub sigma: Vec<f64>,
    /// n x r, orthonormal columns.
    pub v: Matrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let scaled_u = Matrix::from_fn(self.u.rows(), self.rank(), |i, k| {
            self.u[(i, k)] * self.sigma[k]
        });
        scaled_u
            .matmul(&self.v.transpose())
            .expect("factor shapes agree by construction")
    }

    /// `U Vᵀ`, the semi-orthogonal polar factor on the range of the input.
    pub fn polar_factor(&self) -> Matrix {
        self.u
            .matmul(&self.v.transpose())
            .expect("factor shapes agree by construction")
    }

    /// Nuclear norm `tr Σ`.
    pub fn trace(&self) -> f64 {
        self.sigma.iter().sum()
    }
}

pub fn reduced_svd(g: &Matrix) -> Result<SvdFactors> {
    if g.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    if g.rows() >= g.cols() {
        jacobi_tall(g)
    } else {
        let t = jacobi_tall(&g.transpose())?;
        Ok(SvdFactors {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

/// One-sided Jacobi for m >= n.
fn jacobi_tall(a: &Matrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    // Column-major working copies.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= ORTHOGONALITY_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma_max = norms[order[0]];
    if !(sigma_max > 0.0) || !sigma_max.is_finite() {
        return Err(Error::ZeroMatrix);
    }
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&j| norms[j] > RANK_TOLERANCE * sigma_max)
        .collect();
    let r = kept.len();
    let u = Matrix::from_fn(m, r, |i, k| cols[kept[k]][i] / norms[kept[k]]);
    let vm = Matrix::from_fn(n, r, |i, k| v[kept[k]][i]);
    let sigma = kept.iter().map(|&j| norms[j]).collect();
    Ok(SvdFactors { u, sigma, v: vm })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// `U Vᵀ` from the reduced SVD. Rank-deficient inputs map their null
/// directions to zero.
pub fn orthogonalize_via_svd(g: &Matrix) -> Result<Matrix> {
    match reduced_svd(g) {
        Ok(f) => Ok(f.polar_factor()),
        Err(Error::ZeroMatrix) => Err(Error::validation(
            "cannot orthogonalize the zero matrix",
        )),
        Err(e) => Err(e),
    }
}
