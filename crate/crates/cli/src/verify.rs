//! Property checks behind `normdescent verify`.
//!
//! Every check draws from its own named stream of one root seed, measures
//! the worst error it sees, and compares it against a fixed tolerance.
//! Checks are independent, so they run in parallel.

use std::error::Error as StdError;

use clap::ValueEnum;
use normdescent::linalg::{
    compose_spectral, newton_schulz_iterates, orthogonalize_newton_schulz, orthogonalize_via_svd,
    reduced_svd, spd_inverse_root, Matrix, PolynomialSpec,
};
use normdescent::models::{
    majorization_gap, make_dataset, square_loss, square_loss_grad, two_layer_forward_backward,
};
use normdescent::norms::{
    dual_norm, lmo_direction, matrix_norm, max_of_max_norm, vector_norm, Exponent,
    ModularNormSpec, NormSpec,
};
use normdescent::optim::{
    sign_descent_step, spectral_descent_step, Accumulation, AdamHyper, AdamState, OrthoBackend,
    ProdigyHyper, ProdigyState, ShampooState,
};
use normdescent::random::{
    gaussian_matrix, gaussian_vec, matrix_with_condition, random_semi_orthogonal, StreamRng,
};
use normdescent::steepest::{
    modular_objective, solve_max_of_max, solve_modular, solve_spectral_layers, solve_single,
};
use normdescent::{LayerList, LinearModel, SeedTree, TwoLayerNet};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::parse_configs;
use crate::train::{record_error, run_experiment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Linalg,
    Norms,
    Steepest,
    Optimizers,
    Models,
    Cli,
    All,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Linalg => "linalg",
            Suite::Norms => "norms",
            Suite::Steepest => "steepest",
            Suite::Optimizers => "optimizers",
            Suite::Models => "models",
            Suite::Cli => "cli",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Measurement {
    pub what: String,
    pub error: f64,
    pub tolerance: f64,
}

impl Measurement {
    fn new(what: impl Into<String>, error: f64, tolerance: f64) -> Self {
        Self {
            what: what.into(),
            error,
            tolerance,
        }
    }

    fn ok(&self) -> bool {
        self.error <= self.tolerance
    }

    /// How far past its tolerance this measurement is; NaN counts as worst.
    fn severity(&self) -> f64 {
        if self.error.is_nan() {
            f64::INFINITY
        } else if self.tolerance > 0.0 {
            self.error / self.tolerance
        } else if self.error > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    /// Worst measurement relative to its tolerance.
    pub measured_error: f64,
    pub tolerance: f64,
    pub measurements: Vec<Measurement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub suite: &'static str,
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<CheckResult>,
}

type Outcome = Result<Vec<Measurement>, Box<dyn StdError + Send + Sync>>;
type CheckFn = fn(&SeedTree) -> Outcome;

struct Check {
    suite: Suite,
    name: &'static str,
    run: CheckFn,
}

const CHECKS: &[Check] = &[
    Check { suite: Suite::Linalg, name: "svd_roundtrip", run: svd_roundtrip },
    Check { suite: Suite::Linalg, name: "orthogonalization_agreement", run: orthogonalization_agreement },
    Check { suite: Suite::Linalg, name: "shampoo_identity_chain", run: shampoo_identity_chain },
    Check { suite: Suite::Linalg, name: "newton_schulz_diagonal_action", run: newton_schulz_diagonal_action },
    Check { suite: Suite::Linalg, name: "inverse_root_identity", run: inverse_root_identity },
    Check { suite: Suite::Norms, name: "induced_l1_exactness", run: induced_l1_exactness },
    Check { suite: Suite::Norms, name: "duality_consistency", run: duality_consistency },
    Check { suite: Suite::Norms, name: "max_of_max_identity", run: max_of_max_identity },
    Check { suite: Suite::Norms, name: "rms_to_rms_coherence", run: rms_to_rms_coherence },
    Check { suite: Suite::Norms, name: "homogeneity_and_triangle", run: homogeneity_and_triangle },
    Check { suite: Suite::Steepest, name: "closed_form_optimality", run: closed_form_optimality },
    Check { suite: Suite::Steepest, name: "modular_equalization", run: modular_equalization },
    Check { suite: Suite::Steepest, name: "scale_equivariance", run: scale_equivariance },
    Check { suite: Suite::Steepest, name: "sharpness_scaling", run: sharpness_scaling },
    Check { suite: Suite::Steepest, name: "max_of_max_matches_flattened_sign", run: max_of_max_matches_flattened },
    Check { suite: Suite::Optimizers, name: "reduction_equivalences", run: reduction_equivalences },
    Check { suite: Suite::Optimizers, name: "prodigy_monotonicity", run: prodigy_monotonicity },
    Check { suite: Suite::Optimizers, name: "prodigy_doubling", run: prodigy_doubling },
    Check { suite: Suite::Optimizers, name: "shampoo_accumulator_symmetry", run: shampoo_symmetry },
    Check { suite: Suite::Optimizers, name: "rms_step_identity", run: rms_step_identity },
    Check { suite: Suite::Models, name: "majorization", run: majorization },
    Check { suite: Suite::Models, name: "guaranteed_descent", run: guaranteed_descent },
    Check { suite: Suite::Models, name: "gradient_exactness", run: gradient_exactness },
    Check { suite: Suite::Cli, name: "train_determinism", run: train_determinism },
    Check { suite: Suite::Cli, name: "exit_code_contract", run: exit_code_contract },
];

pub fn check_names(suite: Suite) -> Vec<&'static str> {
    selected(suite).map(|c| c.name).collect()
}

fn selected(suite: Suite) -> impl Iterator<Item = &'static Check> {
    CHECKS.iter().filter(move |c| suite == Suite::All || c.suite == suite)
}

pub fn run_suite(suite: Suite, seed: u64) -> Report {
    let root = SeedTree::new(seed);
    let list: Vec<&Check> = selected(suite).collect();
    let checks: Vec<CheckResult> = list
        .par_iter()
        .map(|c| evaluate(c, &root.child(c.name)))
        .collect();
    let passed = checks.iter().filter(|c| c.passed).count();
    Report {
        suite: suite.name(),
        seed,
        passed,
        failed: checks.len() - passed,
        checks,
    }
}

fn evaluate(check: &Check, seeds: &SeedTree) -> CheckResult {
    let base = |measurements: Vec<Measurement>, failure: Option<String>| {
        let worst = measurements
            .iter()
            .max_by(|a, b| a.severity().total_cmp(&b.severity()))
            .cloned();
        let passed = failure.is_none() && measurements.iter().all(Measurement::ok);
        CheckResult {
            suite: check.suite.name(),
            name: check.name,
            passed,
            measured_error: worst.as_ref().map_or(f64::NAN, |m| m.error),
            tolerance: worst.as_ref().map_or(0.0, |m| m.tolerance),
            measurements,
            failure,
        }
    };
    match (check.run)(seeds) {
        Ok(ms) => base(ms, None),
        Err(e) => base(Vec::new(), Some(e.to_string())),
    }
}

/// Running maximum that treats NaN as infinitely bad.
#[derive(Default)]
struct Worst(f64);

impl Worst {
    fn see(&mut self, e: f64) {
        if e.is_nan() {
            self.0 = f64::INFINITY;
        } else if e > self.0 {
            self.0 = e;
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn frob_dist(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).map_or(f64::INFINITY, |d| d.frobenius_norm())
}

fn rel_frob(a: &Matrix, b: &Matrix) -> f64 {
    frob_dist(a, b) / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn layers(rng: &mut StreamRng, shapes: &[(usize, usize)]) -> LayerList {
    LayerList::new(shapes.iter().map(|&(r, c)| gaussian_matrix(rng, r, c)).collect())
        .expect("nonempty")
}

fn random_shape(
    rng: &mut StreamRng,
    rows: std::ops::RangeInclusive<usize>,
    cols: std::ops::RangeInclusive<usize>,
) -> Matrix {
    let (m, n) = (rng.random_range(rows), rng.random_range(cols));
    gaussian_matrix(rng, m, n)
}

fn uniform_matrix(rng: &mut StreamRng, rows: usize, cols: usize, half: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-half..half))
}

fn exponents() -> [Exponent; 5] {
    [
        Exponent::ONE,
        Exponent::TWO,
        Exponent::new(3.0).expect("valid"),
        Exponent::new(1.5).expect("valid"),
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
    for p in exponents() {
        out.extend([
            NormSpec::SchattenP { p },
            NormSpec::InducedL1ToLp { p },
            NormSpec::InducedLpToLinf { p },
        ]);
    }
    out
}

fn vector_specs() -> Vec<NormSpec> {
    let mut out: Vec<NormSpec> = exponents().into_iter().map(NormSpec::lp).collect();
    out.push(NormSpec::VectorRms);
    out
}

fn slice_lp(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

// ---- linalg ----

fn svd_roundtrip(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("matrices");
    let mut shapes = vec![(64, 64), (64, 1), (1, 64)];
    for _ in 0..20 {
        shapes.push((r.random_range(1..=64), r.random_range(1..=64)));
    }
    let mut worst = Worst::default();
    for (m, n) in shapes {
        let a = gaussian_matrix(&mut r, m, n);
        worst.see(rel_frob(&reduced_svd(&a)?.reconstruct(), &a));
    }
    Ok(vec![Measurement::new("relative Frobenius reconstruction error", worst.0, 1e-8)])
}

fn orthogonalization_agreement(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("matrices");
    let spec = PolynomialSpec::default();
    let mut worst = Worst::default();
    for _ in 0..100 {
        let (m, n) = (r.random_range(1..=16), r.random_range(1..=12));
        let cond = r.random_range(1.0..=100.0);
        let g = matrix_with_condition(&mut r, m, n, cond);
        worst.see(frob_dist(
            &orthogonalize_newton_schulz(&g, &spec)?,
            &orthogonalize_via_svd(&g)?,
        ));
    }
    Ok(vec![Measurement::new(
        "Frobenius distance, default cubic vs SVD, condition <= 100",
        worst.0,
        1e-6,
    )])
}

fn shampoo_identity_chain(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("matrices");
    let mut worst = Worst::default();
    for _ in 0..30 {
        let (m, n) = (r.random_range(1..=8), r.random_range(1..=8));
        let g = gaussian_matrix(&mut r, m, n);
        let (l, rr) = (g.gram_rows(), g.gram_cols());
        let quarter = spd_inverse_root(&l, 4, 0.0)?
            .matmul(&g)?
            .matmul(&spd_inverse_root(&rr, 4, 0.0)?)?;
        let left = spd_inverse_root(&l, 2, 0.0)?.matmul(&g)?;
        let right = g.matmul(&spd_inverse_root(&rr, 2, 0.0)?)?;
        let polar = reduced_svd(&g)?.polar_factor();
        let all = [&quarter, &left, &right, &polar];
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                worst.see(frob_dist(all[i], all[j]));
            }
        }
    }
    Ok(vec![Measurement::new("largest pairwise Frobenius distance", worst.0, 1e-8)])
}

fn newton_schulz_diagonal_action(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("diagonals");
    let spec = PolynomialSpec::cubic(8);
    let mut worst = Worst::default();
    for _ in 0..50 {
        let n = r.random_range(1..=6);
        let d: Vec<f64> = (0..n).map(|_| r.random_range(0.01..10.0)).collect();
        let iterates = newton_schulz_iterates(&Matrix::from_diag(&d), &spec)?;
        let mut scalars = iterates[0].diag();
        for x in &iterates[1..] {
            scalars.iter_mut().for_each(|s| *s = spec.scalar_map(*s));
            worst.see(frob_dist(x, &Matrix::from_diag(&scalars)));
        }
    }
    Ok(vec![Measurement::new("matrix iterate vs scalar map on the diagonal", worst.0, 1e-14)])
}

fn inverse_root_identity(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("spd");
    let mut worst = Worst::default();
    for i in 0..40 {
        let n = r.random_range(1..=8);
        let p = 1 + i % 4;
        let q = random_semi_orthogonal(&mut r, n, n);
        let values: Vec<f64> = (0..n).map(|_| 1e4f64.powf(r.random::<f64>())).collect();
        let s = compose_spectral(&q, &values);
        let x = spd_inverse_root(&s, p, 0.0)?;
        let mut prod = s.clone();
        for _ in 0..p {
            prod = x.matmul(&prod)?;
        }
        worst.see(rel_frob(&prod, &Matrix::identity(n)));
    }
    Ok(vec![Measurement::new(
        "relative error of (S^(-1/p))^p S against I, condition <= 1e4",
        worst.0,
        1e-7,
    )])
}

// ---- norms ----

fn induced_l1_exactness(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("matrices");
    let mut basis = Worst::default();
    let mut violation = Worst::default();
    for _ in 0..12 {
        let (rows, cols) = (r.random_range(1..=8), r.random_range(1..=8));
        let m = uniform_matrix(&mut r, rows, cols, 3.0);
        let samples: Vec<Vec<f64>> = (0..100_000 / 12)
            .map(|_| {
                let x = gaussian_vec(&mut r, cols);
                let l1: f64 = x.iter().map(|v| v.abs()).sum();
                x.into_iter().map(|v| v / l1).collect()
            })
            .collect();
        for p in [1.0, 2.0, f64::INFINITY] {
            let formula = matrix_norm(&m, &NormSpec::InducedL1ToLp { p: Exponent::new(p)? })?;
            let best_basis = (0..cols).map(|j| slice_lp(&m.col(j), p)).fold(0.0, f64::max);
            basis.see(if formula == best_basis { 0.0 } else { rel(formula, best_basis) });
            let mut y = vec![0.0; rows];
            for x in &samples {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = m.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
                }
                violation.see((slice_lp(&y, p) - formula).max(0.0));
            }
        }
    }
    Ok(vec![
        Measurement::new("formula vs best standard-basis input", basis.0, 1e-15),
        Measurement::new("sampled unit-l1 quotient above formula", violation.0, 1e-12),
    ])
}

fn duality_consistency(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("gradients");
    let mut pairing = Worst::default();
    let mut unit = Worst::default();
    for _ in 0..50 {
        let m = random_shape(&mut r, 1..=6, 1..=6);
        for spec in matrix_specs() {
            let t = lmo_direction(&m, &spec)?;
            pairing.see(rel(m.inner(&t)?, dual_norm(&m, &spec)?));
            unit.see((matrix_norm(&t, &spec)? - 1.0).abs());
        }
        let v = random_shape(&mut r, 1..=8, 1..=1);
        for spec in vector_specs() {
            let t = lmo_direction(&v, &spec)?;
            pairing.see(rel(v.inner(&t)?, dual_norm(&v, &spec)?));
            unit.see((vector_norm(&t, &spec)? - 1.0).abs());
        }
    }
    Ok(vec![
        Measurement::new("<g, lmo(g)> vs dual norm, relative", pairing.0, 1e-10),
        Measurement::new("norm of lmo direction minus one", unit.0, 1e-10),
    ])
}

fn max_of_max_identity(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("lists");
    let mut worst = Worst::default();
    for _ in 0..1000 {
        let shapes: Vec<(usize, usize)> = (0..r.random_range(1..=5))
            .map(|_| (r.random_range(1..=6), r.random_range(1..=6)))
            .collect();
        let ws = layers(&mut r, &shapes);
        let flat = ws.flatten().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst.see((max_of_max_norm(&ws) - flat).abs());
    }
    Ok(vec![Measurement::new("|max-of-max - flattened l_inf|", worst.0, 0.0)])
}

fn rms_to_rms_coherence(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("matrices");
    let mut worst = Worst::default();
    for _ in 0..100 {
        let m = random_shape(&mut r, 1..=7, 1..=7);
        let scale = (m.cols() as f64 / m.rows() as f64).sqrt();
        worst.see(rel(
            matrix_norm(&m, &NormSpec::RmsToRms)?,
            scale * matrix_norm(&m, &NormSpec::Spectral)?,
        ));
    }
    Ok(vec![Measurement::new("relative error vs sqrt(n/m) * spectral", worst.0, 1e-12)])
}

fn homogeneity_and_triangle(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("pairs");
    let mut homog = Worst::default();
    let mut tri = Worst::default();
    for _ in 0..100 {
        let (rows, cols) = (r.random_range(1..=5), r.random_range(1..=5));
        let a = uniform_matrix(&mut r, rows, cols, 5.0);
        let b = uniform_matrix(&mut r, rows, cols, 5.0);
        let c: f64 = r.random_range(-4.0..4.0);
        let sum = a.add(&b)?;
        for spec in matrix_specs() {
            let (na, nb) = (matrix_norm(&a, &spec)?, matrix_norm(&b, &spec)?);
            homog.see((matrix_norm(&a.scale(c), &spec)? - c.abs() * na).abs() / (1.0 + c.abs() * na));
            tri.see((matrix_norm(&sum, &spec)? - na - nb).max(0.0) / (1.0 + na + nb));
        }
        let (va, vb) = (Matrix::column(a.as_slice())?, Matrix::column(b.as_slice())?);
        let vsum = va.add(&vb)?;
        for spec in vector_specs() {
            let (na, nb) = (vector_norm(&va, &spec)?, vector_norm(&vb, &spec)?);
            homog.see((vector_norm(&va.scale(c), &spec)? - c.abs() * na).abs() / (1.0 + c.abs() * na));
            tri.see((vector_norm(&vsum, &spec)? - na - nb).max(0.0) / (1.0 + na + nb));
        }
    }
    Ok(vec![
        Measurement::new("|N(cA) - |c| N(A)|, scaled", homog.0, 1e-10),
        Measurement::new("triangle violation, scaled", tri.0, 1e-10),
    ])
}

// ---- steepest ----

/// Beats `n` feasible candidates: random directions at random radii, half
/// of them small perturbations of the solution itself. Returns the worst
/// relative amount by which a candidate undercut the closed form.
pub fn candidate_violation(
    gs: &LayerList,
    spec: &ModularNormSpec,
    lambda: f64,
    n: usize,
    rng: &mut StreamRng,
) -> normdescent::Result<f64> {
    let sol = solve_modular(gs, spec, lambda)?;
    let best = sol.objective_value;
    let mut worst = Worst::default();
    for k in 0..n {
        let cand = if k % 2 == 0 {
            let radius = rng.random_range(0.0..2.5) * sol.step_size;
            let dirs: Vec<Matrix> = gs
                .iter()
                .zip(spec.entries())
                .map(|(g, e)| -> normdescent::Result<Matrix> {
                    let t = gaussian_matrix(rng, g.rows(), g.cols());
                    let n = e.scale * matrix_norm(&t, &e.norm)?;
                    Ok(t.scale(radius * rng.random_range(0.0..=1.0) / n))
                })
                .collect::<normdescent::Result<_>>()?;
            LayerList::new(dirs)?
        } else {
            let eps = 10f64.powf(rng.random_range(-4.0..0.0)) * sol.step_size;
            let noise: Vec<Matrix> = gs
                .iter()
                .map(|g| gaussian_matrix(rng, g.rows(), g.cols()).scale(eps))
                .collect();
            sol.updates.add(&LayerList::new(noise)?)?
        };
        let obj = modular_objective(gs, &cand, spec, lambda)?;
        worst.see((best - obj).max(0.0) / best.abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst.0)
}

fn closed_form_optimality(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("instances");
    let mut formula = Worst::default();
    let mut beaten = Worst::default();
    for _ in 0..10 {
        let lambda = r.random_range(0.1..5.0);
        let v = random_shape(&mut r, 1..=4, 1..=1);
        let m = gaussian_matrix(&mut r, 2, 2);
        for (g, spec) in [
            (&v, NormSpec::lp(Exponent::TWO)),
            (&v, NormSpec::linf()),
            (&m, NormSpec::Spectral),
        ] {
            let sol = solve_single(g, &spec, lambda)?;
            let dual = dual_norm(g, &spec)?;
            formula.see(rel(sol.objective_value, -dual * dual / (2.0 * lambda)));
            let ms = ModularNormSpec::uniform(spec, 1)?;
            beaten.see(candidate_violation(&LayerList::single(g.clone()), &ms, lambda, 10_000, &mut r)?);
        }
        let gs = layers(&mut r, &[(2, 2), (3, 1)]);
        let ms = ModularNormSpec::from_pairs([(1.0, NormSpec::Spectral), (2.0, NormSpec::max_abs())])?;
        beaten.see(candidate_violation(&gs, &ms, lambda, 10_000, &mut r)?);
    }
    Ok(vec![
        Measurement::new("objective vs -dual^2/(2 lambda), relative", formula.0, 1e-10),
        Measurement::new("relative undercut by random feasible candidates", beaten.0, 1e-12),
    ])
}

/// Three layers with norms drawn from {spectral, l1->l_inf, rms->rms}.
pub fn random_three_layer_problem(r: &mut StreamRng) -> normdescent::Result<(LayerList, ModularNormSpec, f64)> {
    let norms = [
        NormSpec::Spectral,
        NormSpec::InducedL1ToLp { p: Exponent::INFINITY },
        NormSpec::RmsToRms,
    ];
    let mut mats = Vec::new();
    let mut pairs = Vec::new();
    for _ in 0..3 {
        mats.push(random_shape(r, 1..=5, 1..=5));
        pairs.push((r.random_range(0.1..10.0), norms[r.random_range(0..3)]));
    }
    Ok((LayerList::new(mats)?, ModularNormSpec::from_pairs(pairs)?, r.random_range(0.1..10.0)))
}

fn modular_equalization(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("problems");
    let mut worst = Worst::default();
    for _ in 0..100 {
        let (gs, spec, lambda) = random_three_layer_problem(&mut r)?;
        let sol = solve_modular(&gs, &spec, lambda)?;
        for (d, e) in sol.updates.iter().zip(spec.entries()) {
            worst.see(rel(e.scale * matrix_norm(d, &e.norm)?, sol.step_size));
        }
    }
    Ok(vec![Measurement::new("s_l * |dW_l|_l vs step size, relative", worst.0, 1e-9)])
}

fn scale_equivariance(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("gradients");
    let mut worst = Worst::default();
    for _ in 0..100 {
        let g = random_shape(&mut r, 1..=4, 1..=4);
        let c = 10f64.powf(r.random_range(-2.0..2.0));
        let lambda = r.random_range(0.1..10.0);
        for spec in [NormSpec::Spectral, NormSpec::Frobenius, NormSpec::max_abs(), NormSpec::L1ToRms] {
            let a = solve_single(&g.scale(c), &spec, lambda)?;
            let b = solve_single(&g, &spec, lambda)?.updates[0].scale(c);
            worst.see(frob_dist(&a.updates[0], &b) / (1.0 + b.frobenius_norm()));
        }
    }
    Ok(vec![Measurement::new("update(c g) vs c update(g), scaled", worst.0, 1e-12)])
}

fn sharpness_scaling(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("gradients");
    let mut worst = Worst::default();
    for _ in 0..100 {
        let g = random_shape(&mut r, 1..=4, 1..=4);
        let lambda = r.random_range(0.1..10.0);
        for spec in [NormSpec::Spectral, NormSpec::Frobenius, NormSpec::max_abs(), NormSpec::RmsToRms] {
            let a = solve_single(&g, &spec, lambda)?;
            let b = solve_single(&g, &spec, 2.0 * lambda)?;
            worst.see((b.step_size - a.step_size / 2.0).abs());
            worst.see(max_abs_diff(b.updates[0].as_slice(), a.updates[0].scale(0.5).as_slice()));
        }
    }
    Ok(vec![Measurement::new("doubled sharpness vs halved step and update", worst.0, 0.0)])
}

fn max_of_max_matches_flattened(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("gradients");
    let mut worst = Worst::default();
    for _ in 0..200 {
        let g = random_shape(&mut r, 1..=5, 1..=5);
        let lambda = r.random_range(0.1..10.0);
        let a = solve_max_of_max(&LayerList::single(g.clone()), lambda)?;
        let b = solve_single(&Matrix::column(g.as_slice())?, &NormSpec::linf(), lambda)?;
        worst.see(max_abs_diff(a.updates[0].as_slice(), b.updates[0].as_slice()));
        worst.see((a.step_size - b.step_size).abs());
    }
    Ok(vec![Measurement::new("entrywise difference", worst.0, 0.0)])
}

// ---- optimizers ----

fn reduction_equivalences(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("gradients");
    let mut adam = Worst::default();
    let mut shampoo = Worst::default();
    let mut prodigy = Worst::default();
    for _ in 0..100 {
        let shapes: Vec<(usize, usize)> = (0..r.random_range(1..=4))
            .map(|_| (r.random_range(1..=6), r.random_range(1..=6)))
            .collect();
        let w = layers(&mut r, &shapes);
        let g = layers(&mut r, &shapes);
        let lr = 10f64.powf(r.random_range(-4.0..0.0));

        let mut st = AdamState::new(&w, AdamHyper::without_ema(lr))?;
        let a = st.step(&w, &g)?;
        let b = sign_descent_step(&w, &g, lr)?;
        adam.see(max_abs_diff(&a.flatten(), &b.flatten()));

        let (m, n) = (r.random_range(1..=16), r.random_range(1..=12));
        let w1 = LayerList::single(gaussian_matrix(&mut r, m, n));
        let g1 = LayerList::single(gaussian_matrix(&mut r, m, n));
        let mut sh = ShampooState::new(&w1, lr, 0.0, Accumulation::Sum)?;
        let step = sh.step(&w1, &g1)?.sub(&w1)?;
        let expected = LayerList::single(orthogonalize_via_svd(&g1[0])?.scale(-lr));
        let spectral = spectral_descent_step(&w1, &g1, lr, &OrthoBackend::Svd)?.sub(&w1)?;
        shampoo.see(rel_frob(&step[0], &expected[0]));
        shampoo.see(rel_frob(&step[0], &spectral[0]));

        let w0 = layers(&mut r, &shapes);
        let eta = 10f64.powf(r.random_range(-6.0..0.0));
        let mut pr = ProdigyState::new(&w0, ProdigyHyper::without_ema(eta))?;
        pr.step(&w, &g)?;
        let formula = eta.max(g.inner(&w0.sub(&w)?)? / g.l1_norm());
        prodigy.see(rel(pr.eta, formula));
    }
    Ok(vec![
        Measurement::new("adam(beta=0, eps=0) vs sign descent, entrywise", adam.0, 0.0),
        Measurement::new("fresh shampoo(eps=0) vs -lr U V^T, relative Frobenius", shampoo.0, 1e-8),
        Measurement::new("prodigy(beta=0) step size vs max rule, relative", prodigy.0, 1e-12),
    ])
}

fn prodigy_monotonicity(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("runs");
    let shapes = [(3, 2), (2, 4)];
    let mut worst = Worst::default();
    for hyper in [ProdigyHyper::new(1e-6), ProdigyHyper::without_ema(1e-6)] {
        let w0 = layers(&mut r, &shapes);
        let mut st = ProdigyState::new(&w0, hyper)?;
        let mut w = w0;
        let mut prev = st.eta;
        for _ in 0..1000 {
            let g = layers(&mut r, &shapes);
            w = st.step(&w, &g)?;
            worst.see((prev - st.eta).max(0.0));
            prev = st.eta;
        }
    }
    Ok(vec![Measurement::new("largest decrease of eta", worst.0, 0.0)])
}

/// η sequence of the 1-D constant-gradient construction: w₀ = 0, g = 1.
pub fn prodigy_doubling_sequence(eta0: f64, steps: usize) -> normdescent::Result<Vec<f64>> {
    let scalar = |x: f64| Matrix::column(&[x]).map(LayerList::single);
    let w0 = scalar(0.0)?;
    let g = scalar(1.0)?;
    let mut st = ProdigyState::new(&w0, ProdigyHyper::without_ema(eta0))?;
    let mut w = w0;
    let mut etas = vec![st.eta];
    for _ in 0..steps {
        w = st.step(&w, &g)?;
        etas.push(st.eta);
    }
    Ok(etas)
}

fn prodigy_doubling(_: &SeedTree) -> Outcome {
    let etas = prodigy_doubling_sequence(1e-6, 40)?;
    let mut worst = Worst::default();
    for t in 2..etas.len() - 1 {
        worst.see((etas[t + 1] - 2.0 * etas[t]).abs() / etas[t]);
    }
    let warmup = max_abs_diff(&etas[..3], &[1e-6; 3]);
    Ok(vec![
        Measurement::new("eta_(t+1) vs 2 eta_t for t >= 2, relative", worst.0, 0.0),
        Measurement::new("eta_0..eta_2 vs eta0", warmup, 0.0),
    ])
}

fn shampoo_symmetry(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("runs");
    let shapes = [(4, 3), (2, 5)];
    let w = layers(&mut r, &shapes);
    let mut sum = ShampooState::new(&w, 1e-3, 1e-6, Accumulation::Sum)?;
    let mut ema = ShampooState::new(&w, 1e-3, 1e-6, Accumulation::Ema { beta: 0.9 })?;
    for _ in 0..1000 {
        let g = layers(&mut r, &shapes);
        sum.step(&w, &g)?;
        ema.step(&w, &g)?;
    }
    let worst = sum
        .l_acc
        .iter()
        .chain(&sum.r_acc)
        .chain(&ema.l_acc)
        .chain(&ema.r_acc)
        .map(Matrix::asymmetry)
        .fold(0.0, f64::max);
    Ok(vec![Measurement::new("max |A - A^T| after 1000 steps", worst, 1e-10)])
}

fn rms_step_identity(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("steps");
    let mut from_zero = Worst::default();
    let mut from_any = Worst::default();
    for _ in 0..200 {
        let n = r.random_range(1..=40);
        let lr = 10f64.powf(r.random_range(-3.0..1.0));
        let g: Vec<f64> = (0..n).map(|_| if r.random::<bool>() { 1.5 } else { -0.5 }).collect();
        let g = LayerList::single(Matrix::column(&g)?);
        let zero = LayerList::single(Matrix::zeros(n, 1));
        from_zero.see(rel(sign_descent_step(&zero, &g, lr)?.rms_norm(), lr));
        let w = LayerList::single(Matrix::column(&gaussian_vec(&mut r, n))?);
        from_any.see(rel(sign_descent_step(&w, &g, lr)?.sub(&w)?.rms_norm(), lr));
    }
    Ok(vec![
        Measurement::new("RMS of first step from zero vs lr", from_zero.0, 1e-15),
        Measurement::new("RMS of step from random w vs lr", from_any.0, 1e-12),
    ])
}

// ---- models ----

fn majorization(seeds: &SeedTree) -> Outcome {
    let mut worst = Worst::default();
    for (d_in, d_out) in [(4, 4), (8, 2), (2, 8)] {
        let mut r = seeds.stream(&format!("{d_in}x{d_out}"));
        for _ in 0..1000 {
            let data = make_dataset(d_in, d_out, r.random_range(1..=6), 0.5, r.random())?;
            let model = LinearModel::new(gaussian_matrix(&mut r, d_out, d_in))?;
            let delta = gaussian_matrix(&mut r, d_out, d_in).scale(r.random_range(0.0..3.0));
            worst.see(-majorization_gap(&model, &delta, &data)?);
        }
    }
    Ok(vec![Measurement::new("most negative gap (sign flipped)", worst.0.max(0.0), 1e-10)])
}

/// Largest relative loss increase over `steps` spectral steps with matched
/// sharpness on the seeded linear task.
pub fn spectral_descent_increase(
    d_in: usize,
    d_out: usize,
    n: usize,
    seed: u64,
    steps: usize,
) -> normdescent::Result<f64> {
    let data = make_dataset(d_in, d_out, n, 0.2, seed)?;
    let lambda = d_in as f64 / d_out as f64;
    let mut model = LinearModel::zeros(d_in, d_out);
    let mut prev = square_loss(&model, &data)?;
    let mut worst = Worst::default();
    for _ in 0..steps {
        let g = square_loss_grad(&model, &data)?;
        if g.is_zero() {
            break;
        }
        let sol = solve_spectral_layers(&LayerList::single(g), lambda)?;
        model = LinearModel::new(model.w.add(&sol.updates[0])?)?;
        let loss = square_loss(&model, &data)?;
        worst.see((loss - prev).max(0.0) / prev.max(f64::MIN_POSITIVE));
        prev = loss;
    }
    Ok(worst.0)
}

fn guaranteed_descent(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("tasks");
    let mut worst = Worst::default();
    for _ in 0..10 {
        let (d_in, d_out) = (r.random_range(2..=8), r.random_range(1..=4));
        worst.see(spectral_descent_increase(d_in, d_out, 20, r.random(), 100)?);
    }
    // Rounding alone can move a converged loss by an ulp.
    Ok(vec![Measurement::new("largest relative loss increase per step", worst.0, 1e-12)])
}

fn central_difference(f: impl Fn(&LayerList) -> f64, w: &LayerList, layer: usize, idx: usize, h: f64) -> f64 {
    let mut plus = w.clone();
    plus.layers_mut()[layer].as_mut_slice()[idx] += h;
    let mut minus = w.clone();
    minus.layers_mut()[layer].as_mut_slice()[idx] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

fn fd_error(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / fd.abs().max(an.abs()).max(1e-4)
}

fn gradient_exactness(seeds: &SeedTree) -> Outcome {
    let mut r = seeds.stream("probes");
    let mut linear = Worst::default();
    let mut two = Worst::default();
    for _ in 0..50 {
        let (d_in, d_out) = (r.random_range(2..=6), r.random_range(1..=3));
        let data = make_dataset(d_in, d_out, 7, 0.3, r.random())?;
        let model = LinearModel::new(gaussian_matrix(&mut r, d_out, d_in))?;
        let grad = square_loss_grad(&model, &data)?;
        let f = |ws: &LayerList| {
            LinearModel::from_layers(ws)
                .and_then(|m| square_loss(&m, &data))
                .unwrap_or(f64::NAN)
        };
        let idx = r.random_range(0..grad.len());
        linear.see(fd_error(central_difference(f, &model.to_layers(), 0, idx, 1e-5), grad.as_slice()[idx]));

        let data = make_dataset(4, 2, 9, 0.1, r.random())?;
        let net = TwoLayerNet::init(&mut r, 4, 5, 2);
        let (_, grads) = two_layer_forward_backward(&net, &data)?;
        let f = |ws: &LayerList| {
            TwoLayerNet::from_layers(ws)
                .and_then(|n| two_layer_forward_backward(&n, &data))
                .map_or(f64::NAN, |(l, _)| l)
        };
        let layer = r.random_range(0..2);
        let idx = r.random_range(0..grads[layer].len());
        two.see(fd_error(
            central_difference(f, &net.to_layers(), layer, idx, 1e-5),
            grads[layer].as_slice()[idx],
        ));
    }
    Ok(vec![
        Measurement::new("linear model vs central differences", linear.0, 1e-5),
        Measurement::new("two-layer net vs central differences", two.0, 1e-5),
    ])
}

// ---- cli ----

fn experiment_json(output_path: &str, optimizer: &str, task: &str, steps: usize, seed: u64) -> String {
    serde_json::json!({
        "task": task,
        "optimizer": serde_json::from_str::<serde_json::Value>(optimizer).expect("literal json"),
        "dataset": {"d_in": 6, "d_out": 3, "n": 24, "noise": 0.1, "seed": seed},
        "steps": steps,
        "output_path": output_path,
    })
    .to_string()
}

fn train_determinism(seeds: &SeedTree) -> Outcome {
    let dir = tempfile::tempdir()?;
    let seed = seeds.seed();
    let mut mismatches = 0.0;
    for (i, opt) in [
        r#"{"name": "prodigy", "beta1": 0.0, "beta2": 0.0, "epsilon": 0.0}"#,
        r#"{"name": "shampoo", "lr": 0.01}"#,
    ]
    .into_iter()
    .enumerate()
    {
        let mut csvs = Vec::new();
        for run in ["a", "b"] {
            let base = dir.path().join(format!("{run}{i}")).join("run");
            let text = experiment_json(&base.to_string_lossy(), opt, "two_layer", 150, seed);
            let cfg = parse_configs(&text)?.remove(0);
            run_experiment(&cfg)?;
            csvs.push(std::fs::read(base.with_extension("csv"))?);
        }
        if csvs[0] != csvs[1] {
            mismatches += 1.0;
        }
    }
    Ok(vec![Measurement::new("configs whose two CSVs differ", mismatches, 0.0)])
}

fn exit_code_contract(seeds: &SeedTree) -> Outcome {
    let dir = tempfile::tempdir()?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let seed = seeds.seed();
    let mut wrong = 0.0;

    let invalid = experiment_json(&path("bad"), r#"{"name": "sign_descent", "lr": -1.0}"#, "linear", 5, seed);
    match parse_configs(&invalid) {
        Err(e) if e.exit_code() == crate::error::EXIT_USAGE => {}
        _ => wrong += 1.0,
    }

    let blowup = experiment_json(&path("nan"), r#"{"name": "sign_descent", "lr": 1e308}"#, "linear", 5, seed);
    let rec = run_experiment(&parse_configs(&blowup)?.remove(0))?;
    match record_error(&rec) {
        Some(e) if e.exit_code() == crate::error::EXIT_NUMERICAL => {}
        _ => wrong += 1.0,
    }

    let good = experiment_json(&path("ok"), r#"{"name": "sign_descent", "lr": 0.01}"#, "linear", 5, seed);
    let rec = run_experiment(&parse_configs(&good)?.remove(0))?;
    if record_error(&rec).is_some() || rec.rows.len() != 5 {
        wrong += 1.0;
    }
    Ok(vec![Measurement::new("cases mapped to the wrong exit code", wrong, 0.0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_module_has_its_invariants() {
        assert_eq!(check_names(Suite::All).len(), 25);
        for suite in [Suite::Linalg, Suite::Norms, Suite::Steepest, Suite::Optimizers] {
            assert_eq!(check_names(suite).len(), 5);
        }
        assert_eq!(check_names(Suite::Models).len(), 3);
        assert_eq!(check_names(Suite::Cli).len(), 2);
    }

    #[test]
    fn quick_suites_pass() {
        for suite in [Suite::Linalg, Suite::Optimizers] {
            let report = run_suite(suite, 7);
            for c in &report.checks {
                assert!(c.passed, "{}: {:?} {:?}", c.name, c.measurements, c.failure);
            }
        }
    }

    #[test]
    fn severity_orders_failures_first() {
        let a = Measurement::new("a", 1e-9, 1e-8);
        let b = Measurement::new("b", 1e-9, 0.0);
        assert!(b.severity() > a.severity());
        assert!(Measurement::new("c", f64::NAN, 1.0).severity().is_infinite());
    }
}
