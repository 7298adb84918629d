//! Seeded inputs shared by the benchmarks.

use normdescent::random::{gaussian_matrix, matrix_with_condition};
use normdescent::{LayerList, Matrix, SeedTree};

pub const SIZES: [usize; 3] = [8, 32, 64];

pub fn square(n: usize, name: &str) -> Matrix {
    gaussian_matrix(&mut SeedTree::new(7).stream(name), n, n)
}

/// Square matrix with condition number 100, the regime Newton-Schulz targets.
pub fn conditioned(n: usize) -> Matrix {
    matrix_with_condition(&mut SeedTree::new(7).stream("conditioned"), n, n, 100.0)
}

/// Weights and gradient for a small MLP-shaped parameter list.
pub fn mlp_pair(width: usize) -> (LayerList, LayerList) {
    let shapes = [(width, width / 2), (width, width), (width / 4, width)];
    let mut r = SeedTree::new(7).stream("mlp");
    let mut draw = || {
        LayerList::new(shapes.iter().map(|&(a, b)| gaussian_matrix(&mut r, a, b)).collect())
            .expect("nonempty")
    };
    let w = draw();
    let g = draw();
    (w, g)
}
