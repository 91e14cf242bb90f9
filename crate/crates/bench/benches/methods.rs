//! Benchmarks for the analytical pipeline: rate extraction, the chain
//! solve, the two tail transforms, and end-to-end method assembly.
//!
//! The transform benches run on a shortened grid; runtime there is linear in
//! grid length, so results extrapolate to the default horizon.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use jsqps_core::closed_form::lambda_n_closed_form;
use jsqps_core::markov::McSolution;
use jsqps_core::sojourn::{build_defective_generator, w_matrix_exponential, w_uniformization};
use jsqps_core::{
    compute_all_methods, compute_method, make_time_grid, Hyperparameters, MethodId, SystemConfig,
};

fn bench_rates(c: &mut Criterion) {
    let cfg = SystemConfig::from_rho(5, 0.5, 1.0).unwrap();
    c.bench_function("closed_form_profile_r5", |b| {
        b.iter(|| lambda_n_closed_form(black_box(&cfg), 130).unwrap())
    });
}

fn bench_chain(c: &mut Criterion) {
    let mut g = c.benchmark_group("chain_solve");
    // 23^2 states: direct dense solve.
    let cfg2 = SystemConfig::from_rho(2, 0.7, 1.0).unwrap();
    let h2 = Hyperparameters::defaults_for(2);
    g.bench_function("r2_dense", |b| {
        b.iter(|| McSolution::compute(black_box(&cfg2), &h2).unwrap())
    });
    // 23^3 states: iterative solve.
    let cfg3 = SystemConfig::from_rho(3, 0.7, 1.0).unwrap();
    let h3 = Hyperparameters::defaults_for(3);
    g.sample_size(10);
    g.bench_function("r3_iterative", |b| {
        b.iter(|| McSolution::compute(black_box(&cfg3), &h3).unwrap())
    });
    g.finish();
}

fn bench_transforms(c: &mut Criterion) {
    let cfg = SystemConfig::from_rho(3, 0.6, 1.0).unwrap();
    let profile = lambda_n_closed_form(&cfg, 130).unwrap();
    let grid = make_time_grid(20.0, 0.05).unwrap();
    let gen = build_defective_generator(&profile, 1.0, 130).unwrap();
    let mut g = c.benchmark_group("tail_transforms_401pt");
    g.sample_size(10);
    g.bench_function("matrix_exponential", |b| {
        b.iter(|| w_matrix_exponential(black_box(&gen), &grid).unwrap())
    });
    g.bench_function("uniformization", |b| {
        b.iter(|| w_uniformization(black_box(&profile), 1.0, &grid, 130).unwrap())
    });
    g.finish();
}

fn bench_end_to_end(c: &mut Criterion) {
    let cfg = SystemConfig::from_rho(2, 0.5, 1.0).unwrap();
    let hyper = Hyperparameters::defaults_for(2);
    let grid = make_time_grid(20.0, 0.05).unwrap();
    let mut g = c.benchmark_group("methods_401pt");
    g.sample_size(10);
    g.bench_function("method_c", |b| {
        b.iter(|| compute_method(MethodId::C, black_box(&cfg), &hyper, &grid).unwrap())
    });
    g.bench_function("all_six_shared_intermediates", |b| {
        b.iter(|| compute_all_methods(black_box(&cfg), &hyper, &grid).unwrap())
    });
    g.finish();
}

criterion_group!(
    benches,
    bench_rates,
    bench_chain,
    bench_transforms,
    bench_end_to_end
);
criterion_main!(benches);
