use std::hint::black_box;

use aocsi::bessel::bessel_j0;
use aocsi::{
    build_reward_curve, generate_fading_trace, run_policy, solve_threshold, threshold_policy,
    LinkParams, McsTable, QuadratureConfig, RewardMode,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn bessel(c: &mut Criterion) {
    c.bench_function("bessel_j0 over 0..60", |b| {
        b.iter(|| (0..600).map(|k| bessel_j0(black_box(k as f64 * 0.1)).unwrap()).sum::<f64>())
    });
}

fn reward_curve(c: &mut Criterion) {
    let params = LinkParams::default();
    let table = McsTable::lte_default();
    let quad = QuadratureConfig::default();
    c.bench_function("build_reward_curve 711 ages", |b| {
        b.iter(|| build_reward_curve(black_box(&params), &table, 711, &quad).unwrap())
    });
}

fn solver(c: &mut Criterion) {
    let curve = build_reward_curve(&LinkParams::default(), &McsTable::lte_default(), 711, &QuadratureConfig::default()).unwrap();
    c.bench_function("solve_threshold", |b| {
        b.iter(|| solve_threshold(black_box(&curve), 1e-12, 512).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let params = LinkParams::default();
    let table = McsTable::lte_default();
    let curve = build_reward_curve(&params, &table, 711, &QuadratureConfig::default()).unwrap();
    let policy = threshold_policy(&solve_threshold(&curve, 1e-12, 512).unwrap(), &curve).unwrap();
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    group.bench_function("fading trace 1e5", |b| {
        b.iter(|| generate_fading_trace(&params, 100_000, black_box(1)).unwrap())
    });
    group.bench_function("run_policy 1e5 slots", |b| {
        b.iter(|| run_policy(&policy, &params, &table, 100_000, black_box(1), RewardMode::Expected).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bessel, reward_curve, solver, simulation);
criterion_main!(benches);
