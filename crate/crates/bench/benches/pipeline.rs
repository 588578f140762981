use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qpo_bench::driven;
use qpo_core::noise::build_noise;
use qpo_core::propagator::{solve_r_fundamental, solve_x_fundamental};
use qpo_core::spectral::{build_matsubara, gamma_kernel};
use qpo_core::KernelPart;

fn matsubara(c: &mut Criterion) {
    let sim = driven(1000, 1);
    c.bench_function("matsubara_table_1000", |b| b.iter(|| build_matsubara(black_box(&sim.params), &sim.grid, 1e-10).unwrap()));
}

fn fundamentals(c: &mut Criterion) {
    let mut g = c.benchmark_group("fundamentals");
    for n in [500, 1000, 2000] {
        let sim = driven(n, 1);
        let k = gamma_kernel(KernelPart::Total, &sim.params);
        g.bench_with_input(BenchmarkId::new("r_equation", n), &n, |b, _| {
            b.iter(|| solve_r_fundamental(&sim.params, &sim.drive, &k, &sim.grid).unwrap())
        });
        let sols = solve_r_fundamental(&sim.params, &sim.drive, &k, &sim.grid).unwrap();
        g.bench_with_input(BenchmarkId::new("x_equation", n), &n, |b, &n| b.iter(|| solve_x_fundamental(&sols, &k, n).unwrap()));
    }
    g.finish();
}

fn noise(c: &mut Criterion) {
    let mut g = c.benchmark_group("noise_table");
    g.sample_size(10);
    for n in [500, 1000] {
        let sim = driven(n, 1);
        let tab = build_matsubara(&sim.params, &sim.grid, 1e-10).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| build_noise(&tab, &sim.params, &sim.grid, &sim.bb, &sim.initial).unwrap())
        });
    }
    g.finish();
}

fn snapshots(c: &mut Criterion) {
    let mut g = c.benchmark_group("snapshots");
    g.sample_size(10);
    let sim = driven(1000, 20);
    let prep = sim.prepare().unwrap();
    g.bench_function("run_prepared_1000x20", |b| b.iter(|| sim.run_prepared(&prep).unwrap()));
    g.bench_function("full_run_1000x20", |b| b.iter(|| sim.run().unwrap()));
    g.finish();
}

criterion_group!(benches, matsubara, fundamentals, noise, snapshots);
criterion_main!(benches);
