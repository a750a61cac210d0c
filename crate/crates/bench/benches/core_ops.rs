use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use meta_equiv_core::matrix::{cholesky_check, random_spd, sym_eigenvalues};
use meta_equiv_core::risk::{gradient, hessian, risk, WeightMatrix};
use meta_equiv_core::{random_instance, Matrix};

fn bench_risk_evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("risk_evaluation");
    for dim in [3usize, 10, 20] {
        let spec = random_instance(dim, 42).unwrap();
        let w = WeightMatrix::new(Matrix::identity(dim).scale(0.4)).unwrap();
        group.bench_with_input(BenchmarkId::new("value", dim), &dim, |b, _| {
            b.iter(|| black_box(risk(&spec, &w).unwrap()));
        });
        group.bench_with_input(BenchmarkId::new("gradient", dim), &dim, |b, _| {
            b.iter(|| black_box(gradient(&spec, &w).unwrap()));
        });
    }
    group.finish();
}

fn bench_hessian(c: &mut Criterion) {
    let mut group = c.benchmark_group("hessian_with_certificate");
    for dim in [3usize, 8] {
        let spec = random_instance(dim, 42).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| black_box(hessian(&spec).unwrap()));
        });
    }
    group.finish();
}

fn bench_spd_kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("spd_kernel");
    for dim in [6usize, 20, 40] {
        let m = random_spd(dim, 7, 0.1 * dim as f64);
        group.bench_with_input(BenchmarkId::new("cholesky_check", dim), &dim, |b, _| {
            b.iter(|| black_box(cholesky_check(&m).unwrap()));
        });
        group.bench_with_input(BenchmarkId::new("jacobi_eigenvalues", dim), &dim, |b, _| {
            b.iter(|| black_box(sym_eigenvalues(&m).unwrap()));
        });
    }
    group.finish();
}

criterion_group!(benches, bench_risk_evaluation, bench_hessian, bench_spd_kernel);
criterion_main!(benches);
