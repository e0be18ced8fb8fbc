use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use flownav::fvm::{solve_steady, SolverConfig};
use flownav::planner::{astar, build_graph};
use flownav::refine::{refine_field, RefineConfig};
use flownav::FluidProps;
use flownav_bench::{assimilation_case, network, straight};

fn solve(c: &mut Criterion) {
    let mask = straight(64, 16);
    c.bench_function("solve_steady straight 64x16", |b| {
        b.iter(|| {
            solve_steady(
                black_box(&mask),
                FluidProps::default(),
                &SolverConfig::default(),
            )
            .unwrap()
        })
    });
}

fn plan(c: &mut Criterion) {
    let (field, start, goal) = network(4);
    let v_max = 2e-3;
    c.bench_function("build_graph network 128x64", |b| {
        b.iter(|| build_graph(black_box(&field), 2, 8, v_max).unwrap())
    });
    let graph = build_graph(&field, 2, 8, v_max).unwrap();
    c.bench_function("astar network 128x64", |b| {
        b.iter(|| astar(black_box(&graph), start, goal).unwrap())
    });
}

fn refine(c: &mut Criterion) {
    let (initial, obs) = assimilation_case();
    let cfg = RefineConfig {
        max_iters: 50,
        tol_loss: 0.0,
        ..RefineConfig::default()
    };
    let mut group = c.benchmark_group("refine");
    group.sample_size(10);
    group.bench_function("50 iterations y-bifurcation 64x32", |b| {
        b.iter(|| refine_field(black_box(&initial), &obs, FluidProps::default(), &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, solve, plan, refine);
criterion_main!(benches);
