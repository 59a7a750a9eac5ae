use criterion::{black_box, criterion_group, criterion_main, Criterion};
use renorm_bench::pd_solution;
use renorm_core::combinatorics::superstable_parameters;
use renorm_core::limit::{fatou_fit, multiplier_check};
use renorm_core::renorm::{residual_sup, solve_fixed_point, solve_fixed_point_with, Precision, SolverOptions};
use renorm_core::OrderType;

fn solve(c: &mut Criterion) {
    let pd = OrderType::pd();
    let mut g = c.benchmark_group("solve");
    g.sample_size(20);
    g.bench_function("pd ell=2 degree=40", |b| b.iter(|| solve_fixed_point(black_box(2.0), &pd, 40, 1e-11, None).unwrap()));
    let t3: OrderType = "[2,3,1]".parse().unwrap();
    g.bench_function("p=3 ell=2 degree=40", |b| b.iter(|| solve_fixed_point(black_box(2.0), &t3, 40, 1e-11, None).unwrap()));
    let base = pd_solution();
    let dd = SolverOptions::new(40, 1e-11).with_precision(Precision::DoubleDouble);
    g.bench_function("pd ell=2 -> 3 dd", |b| b.iter(|| solve_fixed_point_with(black_box(3.0), &pd, &dd, Some(&base)).unwrap()));
    g.finish();
}

fn evaluate(c: &mut Criterion) {
    let s = pd_solution();
    c.bench_function("residual_sup 1024", |b| b.iter(|| residual_sup(black_box(&s), 1024).unwrap()));
    c.bench_function("multiplier_check", |b| b.iter(|| multiplier_check(black_box(&s)).unwrap()));
    c.bench_function("fatou_fit", |b| b.iter(|| fatou_fit(black_box(&s)).unwrap()));
    c.bench_function("superstable_parameters p=9", |b| b.iter(|| superstable_parameters(black_box(9)).unwrap()));
}

criterion_group!(benches, solve, evaluate);
criterion_main!(benches);
