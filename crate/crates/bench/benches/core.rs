use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use surfpde::discovery::discover_evolution;
use surfpde::kernels::KernelSpec;
use surfpde::regression::{lasso, sqrt_lasso};
use surfpde::solver::solve_evolution;
use surfpde::{build_operators, recipes, ForwardProblem};
use surfpde_bench::{sparse_problem, sphere_cloud};

fn kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel");
    let x = [0.3, -0.4, 0.866];
    let y = [0.1, 0.7, -0.7];
    for m in [4.0, 6.0] {
        let spec = KernelSpec::matern(3, 1, m).unwrap();
        group.bench_with_input(BenchmarkId::new("matern_value", m), &spec, |b, s| {
            b.iter(|| s.value(black_box(&x), black_box(&y)))
        });
        let mut out = [0.0; 3];
        group.bench_with_input(BenchmarkId::new("matern_gradient", m), &spec, |b, s| {
            b.iter(|| s.gradient_x_into(black_box(&x), black_box(&y), &mut out))
        });
    }
    group.finish();
}

fn operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_operators");
    group.sample_size(10);
    let spec = KernelSpec::matern(3, 1, 4.0).unwrap();
    for n in [100, 200, 400] {
        let cloud = sphere_cloud(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &cloud, |b, cloud| {
            b.iter(|| build_operators(cloud, &spec).unwrap())
        });
    }
    group.finish();
}

fn regression(c: &mut Criterion) {
    let mut group = c.benchmark_group("regression");
    for (rows, terms) in [(200, 21), (1000, 55)] {
        let problem = sparse_problem(rows, terms, 1e-2);
        let id = format!("{rows}x{terms}");
        group.bench_with_input(BenchmarkId::new("lasso_cd", &id), &problem, |b, p| {
            b.iter(|| lasso(p, 1e-10, 10_000).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sqrt_lasso", &id), &problem, |b, p| {
            b.iter(|| sqrt_lasso(p, 1e-10).unwrap())
        });
    }
    group.finish();
}

fn sbdf2(c: &mut Criterion) {
    let mut group = c.benchmark_group("sbdf2");
    group.sample_size(10);
    let snaps = recipes::ex2_sphere(300, 0.01, 20, 0.0, 0).unwrap();
    let spec = KernelSpec::matern(3, 1, 4.0).unwrap();
    let ops = build_operators(snaps.cloud(), &spec).unwrap();
    let model = discover_evolution(&snaps, &spec, 2, &surfpde::RegressionSettings::lasso(0.01)).unwrap();
    let u0 = snaps.values().column(0).into_owned();
    let problem = ForwardProblem::evolution(&model, &ops, &u0, 0.01, 20, snaps.forcing().clone()).unwrap();
    group.bench_function("sphere_300_nodes_20_steps", |b| b.iter(|| solve_evolution(&problem).unwrap()));
    group.finish();
}

criterion_group!(benches, kernels, operators, regression, sbdf2);
criterion_main!(benches);
