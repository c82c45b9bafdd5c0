use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tensornet::linalg::svd;
use tensornet::qsim::evolve;
use tensornet::{eval_contract, eval_labeling_sum, scale};
use tensornet_bench::{dense_matrix, ising_grid};

fn contraction(c: &mut Criterion) {
    let mut group = c.benchmark_group("eval_contract");
    for (rows, cols) in [(2, 3), (3, 3), (3, 4)] {
        let (net, order) = ising_grid(rows, cols, 0.3);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{rows}x{cols}")),
            &(net, order),
            |b, (n, o)| b.iter(|| eval_contract(black_box(n), o).unwrap()),
        );
    }
    group.finish();
}

fn labeling_sum(c: &mut Criterion) {
    let (net, _) = ising_grid(2, 3, 0.3);
    c.bench_function("eval_labeling_sum/2x3", |b| {
        b.iter(|| eval_labeling_sum(black_box(&net)).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let (net, order) = ising_grid(3, 3, 0.3);
    c.bench_function("scale/3x3", |b| b.iter(|| scale(black_box(&net), &order).unwrap()));
    c.bench_function("evolve/3x3", |b| b.iter(|| evolve(black_box(&net), &order).unwrap()));
}

fn decomposition(c: &mut Criterion) {
    let mut group = c.benchmark_group("svd");
    for n in [8, 32, 64] {
        let m = dense_matrix(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| svd(black_box(m)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, contraction, labeling_sum, simulation, decomposition);
criterion_main!(benches);
