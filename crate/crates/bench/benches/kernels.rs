use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use potgame_core::metrics::clarke_residual;
use potgame_core::smoothing::two_point_gradient;
use potgame_core::solvers::{rs_rsg_run, sa_lower_solve, LowerLevelConfig, StopRule};
use potgame_core::*;

fn two_point(c: &mut Criterion) {
    let (game, _) = CournotGame::benchmark();
    let mut s = RandomStream::derive(1, StreamKey::new(0, 0, 0, Purpose::Probe, 0));
    c.bench_function("two_point_gradient", |b| {
        b.iter(|| two_point_gradient(&game, 2, black_box(&[3.9]), 0.5, &mut s).unwrap())
    });
}

fn rs_rsg_iteration(c: &mut Criterion) {
    let (game, _) = CournotGame::benchmark();
    let mut cfg = SolverConfig::new(0.01, 16, 10);
    cfg.eta = 0.5;
    cfg.x0 = Some(vec![12.0; 6]);
    cfg.stop = StopRule::Horizon;
    c.bench_function("rs_rsg_10_iterations_batch_16", |b| {
        b.iter(|| rs_rsg_run(&game, black_box(&cfg), 0, None).unwrap())
    });
}

fn sa_solve(c: &mut Criterion) {
    let (game, _) = HierGame::benchmark();
    let lower = LowerLevelConfig::default();
    let mut s = RandomStream::derive(1, StreamKey::new(0, 0, 0, Purpose::LowerLevel, 0));
    c.bench_function("sa_lower_solve_1000_steps", |b| {
        b.iter(|| sa_lower_solve(&game, 0, black_box(&[7.0]), 1_000, &lower, &mut s).unwrap())
    });
}

fn clarke(c: &mut Criterion) {
    let (game, _) = CournotGame::benchmark();
    let x = game.players().profile(vec![4.0, 3.5, 0.0, 12.0, 4.2, 1.0]).unwrap();
    c.bench_function("clarke_residual", |b| b.iter(|| clarke_residual(&game, black_box(&x), 7.0).unwrap()));
}

criterion_group!(benches, two_point, rs_rsg_iteration, sa_solve, clarke);
criterion_main!(benches);
