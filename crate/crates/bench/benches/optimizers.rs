use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use normdescent::norms::ModularNormSpec;
use normdescent::optim::{
    sign_descent_step, spectral_descent_step, Accumulation, AdamHyper, AdamState, OrthoBackend,
    ProdigyHyper, ProdigyState, ShampooState,
};
use normdescent::steepest::solve_modular;
use normdescent::{NormSpec, PolynomialSpec};
use normdescent_bench::mlp_pair;

fn steps(c: &mut Criterion) {
    let (w, g) = mlp_pair(32);
    let mut group = c.benchmark_group("optimizer_step_mlp32");
    group.bench_function("sign_descent", |b| b.iter(|| sign_descent_step(black_box(&w), black_box(&g), 1e-3)));
    group.bench_function("spectral_svd", |b| {
        b.iter(|| spectral_descent_step(black_box(&w), black_box(&g), 1e-3, &OrthoBackend::Svd))
    });
    let ns = OrthoBackend::NewtonSchulz(PolynomialSpec::default());
    group.bench_function("spectral_newton_schulz", |b| {
        b.iter(|| spectral_descent_step(black_box(&w), black_box(&g), 1e-3, &ns))
    });
    group.bench_function("adam", |b| {
        b.iter_batched(
            || AdamState::new(&w, AdamHyper::new(1e-3)).expect("valid"),
            |mut st| st.step(&w, &g),
            BatchSize::SmallInput,
        )
    });
    group.bench_function("shampoo", |b| {
        b.iter_batched(
            || ShampooState::new(&w, 1e-3, 1e-12, Accumulation::Sum).expect("valid"),
            |mut st| st.step(&w, &g),
            BatchSize::SmallInput,
        )
    });
    group.bench_function("prodigy", |b| {
        b.iter_batched(
            || ProdigyState::new(&w, ProdigyHyper::new(1e-6)).expect("valid"),
            |mut st| st.step(&w, &g),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let (_, g) = mlp_pair(32);
    let spec = ModularNormSpec::from_pairs([
        (1.0, NormSpec::Spectral),
        (2.0, NormSpec::RmsToRms),
        (1.0, NormSpec::max_abs()),
    ])
    .expect("valid");
    c.bench_function("solve_modular_mlp32", |b| b.iter(|| solve_modular(black_box(&g), &spec, 1.0)));
}

criterion_group!(benches, steps, solvers);
criterion_main!(benches);
