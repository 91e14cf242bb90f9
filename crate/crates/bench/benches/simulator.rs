//! Benchmarks for the discrete-event simulator and the CDF metrics.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use jsqps_core::{
    empirical_cdf, make_time_grid, run_simulation, wasserstein, ServiceDistribution,
    SimulationConfig, SystemConfig, TimeGrid,
};

fn bench_simulator(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulator");
    g.sample_size(20);
    for (label, r, rho) in [("r2_rho05", 2u32, 0.5), ("r5_rho08", 5, 0.8)] {
        let system = SystemConfig::from_rho(r, rho, 1.0).unwrap();
        let cfg = SimulationConfig::new(system, ServiceDistribution::exponential(1.0))
            .with_horizon(2_000.0, 0.0)
            .with_trials(1)
            .with_seed(42);
        g.bench_function(format!("horizon_2k_{label}"), |b| {
            b.iter(|| run_simulation(black_box(&cfg)).unwrap())
        });
    }
    g.finish();
}

fn bench_metrics(c: &mut Criterion) {
    let system = SystemConfig::from_rho(2, 0.5, 1.0).unwrap();
    let cfg = SimulationConfig::new(system, ServiceDistribution::exponential(1.0))
        .with_horizon(4_000.0, 500.0)
        .with_trials(1)
        .with_seed(42);
    let samples = run_simulation(&cfg).unwrap().pop().unwrap();
    let grid = TimeGrid::default_grid();

    c.bench_function("empirical_cdf_default_grid", |b| {
        b.iter(|| empirical_cdf(black_box(&samples), &grid).unwrap())
    });

    let g1 = empirical_cdf(&samples, &grid).unwrap();
    let g2 = empirical_cdf(&samples[..samples.len() / 2], &grid).unwrap();
    c.bench_function("wasserstein_default_grid", |b| {
        b.iter(|| wasserstein(black_box(&g1), black_box(&g2)).unwrap())
    });
}

fn bench_grid(c: &mut Criterion) {
    c.bench_function("make_default_grid", |b| {
        b.iter(|| make_time_grid(182.32, 0.01).unwrap())
    });
}

criterion_group!(benches, bench_simulator, bench_metrics, bench_grid);
criterion_main!(benches);
