use std::hint::black_box;

use canonme::dynamics::{propagate_memory_kernel, Generic, MemoryKernelSpec};
use canonme::measures::{canonical_series, FnSource};
use canonme::models::zoo;
use canonme::{canonicalize, hermitian_eig, linalg, OperatorBasis, TimeGrid};
use canonme_bench::{generator, hermitian};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn eigensolver(c: &mut Criterion) {
    let mut g = c.benchmark_group("hermitian_eig");
    for m in [3, 8, 15, 35, 63] {
        let a = hermitian(m, 1);
        g.bench_with_input(BenchmarkId::from_parameter(m), &a, |b, a| {
            b.iter(|| hermitian_eig(black_box(a)).unwrap())
        });
    }
    g.finish();
}

fn canonicalization(c: &mut Criterion) {
    let mut g = c.benchmark_group("canonicalize");
    for d in [2, 3, 4, 6, 8] {
        let s = generator(d, 2);
        let basis = OperatorBasis::new(d).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(d), &s, |b, s| {
            b.iter(|| canonicalize(black_box(s), &basis).unwrap())
        });
    }
    g.finish();
}

fn series(c: &mut Criterion) {
    let s = generator(3, 3);
    let grid = TimeGrid::uniform(0.0, 1.0, 1000).unwrap();
    c.bench_function("canonical_series/d3_1001", |b| {
        b.iter(|| {
            let src = FnSource::new(3, |t| Ok(s.clone().with_time(t)));
            canonical_series(&src, black_box(&grid)).unwrap()
        })
    });
}

fn volterra(c: &mut Criterion) {
    let mut g = c.benchmark_group("memory_kernel");
    g.sample_size(10);
    let grid = TimeGrid::uniform(0.0, 1.0, 1000).unwrap();
    let fast = MemoryKernelSpec {
        hamiltonian: linalg::zeros(2),
        kernel: Box::new(zoo::dephasing_kernel(1.0, 4.0)),
    };
    let slow = MemoryKernelSpec {
        hamiltonian: linalg::zeros(2),
        kernel: Box::new(Generic(zoo::dephasing_kernel(1.0, 4.0))),
    };
    g.bench_function("exponential_1000", |b| {
        b.iter(|| propagate_memory_kernel(&fast, black_box(&grid)).unwrap())
    });
    g.bench_function("generic_1000", |b| {
        b.iter(|| propagate_memory_kernel(&slow, black_box(&grid)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, eigensolver, canonicalization, series, volterra);
criterion_main!(benches);
