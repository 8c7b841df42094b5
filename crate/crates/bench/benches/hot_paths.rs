//! Throughput benchmarks for the inner loops: event sampling with and
//! without a rate tree, one finite-volume step, and the coefficient
//! quadrature.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sep_bench::{engine, solver_setup};
use sep_core::coefficients::beta_quadrature;
use sep_core::MobilityModel;

fn kmc_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("kmc_step");
    group.bench_function("uniform_sampler", |b| {
        let mut eng = engine(100, 0.0);
        assert!(eng.uses_uniform_sampling());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.iter(|| black_box(eng.step(&mut rng)));
    });
    group.bench_function("rate_tree", |b| {
        let mut eng = engine(100, 1.0);
        assert!(!eng.uses_uniform_sampling());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.iter(|| black_box(eng.step(&mut rng)));
    });
    group.finish();
}

fn pde_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("pde_step");
    for (label, model) in [
        ("mean_field", MobilityModel::MeanField),
        ("composite_quastel", MobilityModel::CompositeQuastel),
    ] {
        group.bench_function(label, |b| {
            let (mut solver, mut fields) = solver_setup(50, model);
            let dt = solver.dt();
            b.iter(|| solver.step(black_box(&mut fields), dt).unwrap());
        });
    }
    group.finish();
}

fn quadrature(c: &mut Criterion) {
    c.bench_function("beta_quadrature_d2_m128", |b| {
        b.iter(|| black_box(beta_quadrature(2, 128).unwrap()));
    });
}

criterion_group!(benches, kmc_steps, pde_steps, quadrature);
criterion_main!(benches);
