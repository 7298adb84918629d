//! Seeded random generation.
//!
//! All randomness flows from one 64-bit seed. Each consumer asks for a named
//! stream, so adding a new consumer never shifts the draws of another one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::Matrix;

pub type StreamRng = ChaCha8Rng;

/// Splittable seed: `stream(name)` and `child(name)` are pure functions of
/// the root seed and the name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    seed: u64,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, name: &str) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(fnv1a(name.as_bytes()));
        rng
    }

    pub fn child(&self, name: &str) -> SeedTree {
        SeedTree {
            seed: splitmix(self.seed ^ fnv1a(name.as_bytes())),
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Matrix with orthonormal columns (rows >= cols) or rows (rows < cols),
/// from modified Gram-Schmidt on a Gaussian draw.
pub fn random_semi_orthogonal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    if rows < cols {
        return random_semi_orthogonal(rng, cols, rows).transpose();
    }
    loop {
        let g = gaussian_matrix(rng, rows, cols);
        let mut q: Vec<Vec<f64>> = (0..cols).map(|j| g.col(j)).collect();
        let mut ok = true;
        for j in 0..cols {
            for k in 0..j {
                let proj: f64 = q[j].iter().zip(&q[k]).map(|(a, b)| a * b).sum();
                let qk = q[k].clone();
                q[j].iter_mut().zip(&qk).for_each(|(a, b)| *a -= proj * b);
            }
            let norm = q[j].iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            q[j].iter_mut().for_each(|a| *a /= norm);
        }
        if ok {
            return Matrix::from_fn(rows, cols, |i, j| q[j][i]);
        }
    }
}

/// `U · diag(sigma) · Vᵀ` with Haar-like random `U`, `V`.
/// `sigma.len()` must equal `min(rows, cols)`.
pub fn matrix_with_singular_values<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    sigma: &[f64],
) -> Matrix {
    let k = rows.min(cols);
    assert_eq!(sigma.len(), k, "need min(rows, cols) singular values");
    let u = random_semi_orthogonal(rng, rows, k);
    let v = random_semi_orthogonal(rng, cols, k);
    let us = Matrix::from_fn(rows, k, |i, j| u[(i, j)] * sigma[j]);
    us.matmul(&v.transpose()).expect("shapes agree")
}

/// Random full-rank matrix whose condition number is exactly `cond`:
/// singular values log-uniform in `[1, cond]` with both endpoints present.
pub fn matrix_with_condition<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    cond: f64,
) -> Matrix {
    let k = rows.min(cols);
    let mut sigma: Vec<f64> = (0..k)
        .map(|i| match i {
            0 => cond,
            i if i == k - 1 => 1.0,
            _ => cond.powf(rng.random::<f64>()),
        })
        .collect();
    if k == 1 {
        sigma[0] = 1.0;
    }
    sigma.sort_by(|a, b| b.total_cmp(a));
    matrix_with_singular_values(rng, rows, cols, &sigma)
}
