mod common;

use common::*;
use normdescent::linalg::{reduced_svd, Matrix};
use normdescent::norms::*;
use normdescent::random::gaussian_vec;
use proptest::prelude::*;
use rand::Rng;

fn exps() -> Vec<Exponent> {
    vec![
        Exponent::ONE,
        Exponent::TWO,
        Exponent::new(3.0).unwrap(),
        Exponent::new(1.5).unwrap(),
        Exponent::INFINITY,
    ]
}

fn matrix_specs() -> Vec<NormSpec> {
    let mut out = vec![
        NormSpec::Frobenius,
        NormSpec::Spectral,
        NormSpec::RmsToRms,
        NormSpec::L1ToRms,
    ];
    for p in exps() {
        out.push(NormSpec::SchattenP { p });
        out.push(NormSpec::InducedL1ToLp { p });
        out.push(NormSpec::InducedLpToLinf { p });
    }
    out
}

fn vector_specs() -> Vec<NormSpec> {
    let mut out: Vec<NormSpec> = exps().into_iter().map(NormSpec::lp).collect();
    out.push(NormSpec::VectorRms);
    out
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn lmo_attains_the_dual(m in matrix(6, 6), v in column(8)) {
        prop_assume!(!m.is_zero() && !v.is_zero());
        for spec in matrix_specs() {
            let dual = dual_norm(&m, &spec).unwrap();
            let t = lmo_direction(&m, &spec).unwrap();
            prop_assert!(rel(m.inner(&t).unwrap(), dual) <= 1e-10, "{}", spec.label());
            prop_assert!(rel(matrix_norm(&t, &spec).unwrap(), 1.0) <= 1e-10, "{}", spec.label());
        }
        for spec in vector_specs() {
            let dual = dual_norm(&v, &spec).unwrap();
            let t = lmo_direction(&v, &spec).unwrap();
            prop_assert!(rel(v.inner(&t).unwrap(), dual) <= 1e-10, "{}", spec.label());
            prop_assert!(rel(vector_norm(&t, &spec).unwrap(), 1.0) <= 1e-10, "{}", spec.label());
        }
    }

    #[test]
    fn sampled_duals_never_exceed_the_formula(m in matrix(4, 4), seed in any::<u64>()) {
        prop_assume!(!m.is_zero());
        for spec in matrix_specs() {
            let formula = dual_norm(&m, &spec).unwrap();
            let sampled = brute_force_dual(&m, &spec, 200, seed).unwrap();
            prop_assert!(sampled <= formula * (1.0 + 1e-12), "{}", spec.label());
        }
    }

    #[test]
    fn homogeneity_and_triangle(a in matrix(5, 5), c in -4.0..4.0f64, seed in any::<u64>()) {
        let mut r = rng(seed, "partner");
        let b = Matrix::from_fn(a.rows(), a.cols(), |_, _| r.random_range(-5.0..5.0));
        let sum = a.add(&b).unwrap();
        for spec in matrix_specs() {
            let (na, nb) = (matrix_norm(&a, &spec).unwrap(), matrix_norm(&b, &spec).unwrap());
            let scaled = matrix_norm(&a.scale(c), &spec).unwrap();
            prop_assert!((scaled - c.abs() * na).abs() <= 1e-10 * (1.0 + c.abs() * na), "{}", spec.label());
            prop_assert!(matrix_norm(&sum, &spec).unwrap() <= na + nb + 1e-10 * (1.0 + na + nb), "{}", spec.label());
        }
    }

    #[test]
    fn vector_homogeneity_and_triangle(a in column(8), c in -4.0..4.0f64) {
        let b = a.map(|x| (x * 1.7).sin());
        let sum = a.add(&b).unwrap();
        for spec in vector_specs() {
            let (na, nb) = (vector_norm(&a, &spec).unwrap(), vector_norm(&b, &spec).unwrap());
            prop_assert!((vector_norm(&a.scale(c), &spec).unwrap() - c.abs() * na).abs() <= 1e-10 * (1.0 + na));
            prop_assert!(vector_norm(&sum, &spec).unwrap() <= na + nb + 1e-10 * (1.0 + na + nb));
        }
    }

    #[test]
    fn max_of_max_is_flattened_linf(ws in layer_list(5, 6)) {
        let flat = ws.flatten().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert_eq!(max_of_max_norm(&ws), flat);
    }

    #[test]
    fn rms_to_rms_is_rescaled_spectral(m in matrix(7, 7)) {
        prop_assume!(!m.is_zero());
        let expected = (m.cols() as f64 / m.rows() as f64).sqrt() * reduced_svd(&m).unwrap().sigma[0];
        prop_assert!(rel(matrix_norm(&m, &NormSpec::RmsToRms).unwrap(), expected) <= 1e-12);
    }

    #[test]
    fn induced_l1_norms_are_column_maxima(m in matrix(8, 8)) {
        for p in [1.0, 2.0, f64::INFINITY] {
            let spec = NormSpec::InducedL1ToLp { p: Exponent::new(p).unwrap() };
            let formula = matrix_norm(&m, &spec).unwrap();
            let basis_max = (0..m.cols())
                .map(|j| {
                    let e = Matrix::from_fn(m.cols(), 1, |i, _| if i == j { 1.0 } else { 0.0 });
                    naive_lp(m.matmul(&e).unwrap().as_slice(), p)
                })
                .fold(0.0f64, f64::max);
            prop_assert!(rel(formula, basis_max) <= 1e-15 || formula == basis_max);
        }
    }
}

/// Rayleigh-quotient sampling: no unit-ℓ₁ input beats the column formula.
#[test]
fn induced_l1_norms_are_not_exceeded_by_samples() {
    let mut r = rng(11, "rayleigh");
    for trial in 0..12 {
        let (rows, cols) = (1 + trial % 8, 1 + (trial * 5) % 8);
        let m = Matrix::from_fn(rows, cols, |_, _| r.random_range(-3.0..3.0));
        for p in [1.0, 2.0, f64::INFINITY] {
            let formula = matrix_norm(&m, &NormSpec::InducedL1ToLp { p: Exponent::new(p).unwrap() }).unwrap();
            for _ in 0..2_000 {
                let x = gaussian_vec(&mut r, cols);
                let l1: f64 = x.iter().map(|v| v.abs()).sum();
                let x = Matrix::column(&x).unwrap().scale(1.0 / l1);
                let q = naive_lp(m.matmul(&x).unwrap().as_slice(), p);
                assert!(q <= formula + 1e-12, "p={p}: {q} > {formula}");
            }
        }
    }
}

#[test]
fn documented_examples() {
    let m = Matrix::from_rows(&[[1.0, -5.0], [2.0, 3.0]]).unwrap();
    assert_eq!(matrix_norm(&m, &NormSpec::max_abs()).unwrap(), 5.0);
    let l1_l2 = matrix_norm(&m, &NormSpec::InducedL1ToLp { p: Exponent::TWO }).unwrap();
    assert!(rel(l1_l2, 34f64.sqrt()) <= 1e-15);
    let l2_linf = matrix_norm(&m, &NormSpec::InducedLpToLinf { p: Exponent::TWO }).unwrap();
    assert!(rel(l2_linf, 26f64.sqrt()) <= 1e-15);
    let i2 = Matrix::identity(2);
    assert!(rel(matrix_norm(&i2, &NormSpec::Spectral).unwrap(), 1.0) <= 1e-15);
    assert!(rel(dual_norm(&i2, &NormSpec::Spectral).unwrap(), 2.0) <= 1e-15);
}
