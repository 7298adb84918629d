#![allow(dead_code)]

use normdescent::linalg::{compose_spectral, Matrix};
use normdescent::random::{gaussian_matrix, random_semi_orthogonal, SeedTree, StreamRng};
use normdescent::LayerList;
use proptest::prelude::*;
use rand::Rng;

pub fn rng(seed: u64, name: &str) -> StreamRng {
    SeedTree::new(seed).stream(name)
}

/// Dense matrix with entries in `[-5, 5]`, dims in `1..=max_r` × `1..=max_c`.
pub fn matrix(max_r: usize, max_c: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_r, 1..=max_c).prop_flat_map(|(r, c)| {
        prop::collection::vec(-5.0..5.0f64, r * c).prop_map(move |d| Matrix::new(r, c, d).unwrap())
    })
}

pub fn column(max_n: usize) -> impl Strategy<Value = Matrix> {
    matrix(max_n, 1)
}

pub fn layer_list(max_layers: usize, max_dim: usize) -> impl Strategy<Value = LayerList> {
    prop::collection::vec(matrix(max_dim, max_dim), 1..=max_layers)
        .prop_map(|v| LayerList::new(v).unwrap())
}

/// Two lists with the same shapes.
pub fn layer_list_pair(max_layers: usize, max_dim: usize) -> impl Strategy<Value = (LayerList, LayerList)> {
    prop::collection::vec((1..=max_dim, 1..=max_dim), 1..=max_layers).prop_flat_map(|shapes| {
        let one = move |shapes: Vec<(usize, usize)>| {
            shapes
                .into_iter()
                .map(|(r, c)| {
                    prop::collection::vec(-5.0..5.0f64, r * c)
                        .prop_map(move |d| Matrix::new(r, c, d).unwrap())
                })
                .collect::<Vec<_>>()
                .prop_map(|v| LayerList::new(v).unwrap())
        };
        (one(shapes.clone()), one(shapes))
    })
}

pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

pub fn abs_err(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Textbook triple loop, kept deliberately naive.
pub fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols(), b.rows());
    let mut out = vec![0.0; a.rows() * b.cols()];
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut acc = 0.0;
            for k in 0..a.cols() {
                acc += a[(i, k)] * b[(k, j)];
            }
            out[i * b.cols() + j] = acc;
        }
    }
    Matrix::new(a.rows(), b.cols(), out).unwrap()
}

pub fn naive_lp(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Random SPD matrix with eigenvalues log-uniform in `[1, cond]`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, cond: f64) -> Matrix {
    let q = random_semi_orthogonal(rng, n, n);
    let values: Vec<f64> = (0..n).map(|_| cond.powf(rng.random::<f64>())).collect();
    compose_spectral(&q, &values)
}

pub fn gaussian_layers<R: Rng>(rng: &mut R, shapes: &[(usize, usize)]) -> LayerList {
    LayerList::new(shapes.iter().map(|&(r, c)| gaussian_matrix(rng, r, c)).collect()).unwrap()
}

/// Central finite difference of `f` at `w` along the unit entry `(l, i)`.
pub fn central_difference(
    f: impl Fn(&LayerList) -> f64,
    w: &LayerList,
    layer: usize,
    index: usize,
    h: f64,
) -> f64 {
    let mut plus = w.clone();
    plus.layers_mut()[layer].as_mut_slice()[index] += h;
    let mut minus = w.clone();
    minus.layers_mut()[layer].as_mut_slice()[index] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Fixed case count and no regression files next to the test sources.
pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}
