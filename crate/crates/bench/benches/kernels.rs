use std::hint::black_box;

use cloudhodge::exterior::lift_map;
use cloudhodge::graph::build_graph;
use cloudhodge::hodge::{HodgeOptions, LinearOperator};
use cloudhodge::kernel::KernelSpec;
use cloudhodge_bench::{frame, sphere_cloud, sphere_geometry};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn graph(c: &mut Criterion) {
    let mut group = c.benchmark_group("graph");
    group.sample_size(10);
    for m in [1000, 4000] {
        let cloud = sphere_cloud(m);
        let config = KernelSpec::default().resolve(&cloud).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| build_graph(black_box(&cloud), &config).unwrap())
        });
    }
    group.finish();
}

fn lift(c: &mut Criterion) {
    let mut group = c.benchmark_group("lift");
    for (d, n, k) in [(3, 2, 1), (5, 4, 2), (9, 4, 2)] {
        let f = frame(d, n);
        group.bench_function(format!("d{d}n{n}k{k}"), |b| {
            b.iter(|| lift_map(black_box(&f), k).unwrap())
        });
    }
    group.finish();
}

fn matvec(c: &mut Criterion) {
    let g = sphere_geometry(2000);
    let mut group = c.benchmark_group("matvec");
    group.sample_size(20);
    for k in 0..=2 {
        let op = g.hodge(k, HodgeOptions::default()).unwrap();
        let x: Vec<f64> = (0..op.size()).map(|i| (i as f64 * 0.618).fract() - 0.5).collect();
        let mut y = vec![0.0; x.len()];
        group.bench_function(format!("k{k}"), |b| {
            b.iter(|| op.apply_compressed(black_box(&x), &mut y))
        });
    }
    group.finish();
}

criterion_group!(benches, graph, lift, matvec);
criterion_main!(benches);
