use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gpalign_bench::dataset;
use gpalign_core::gp::{log_marginal_grad, sparse_bound_grad};
use gpalign_core::model::{gradient, uniform_grid};
use gpalign_core::{dtw_align, initialize, FitConfig, KernelSpec, ModelConfig, Points};
use nalgebra::DMatrix;
use std::hint::black_box;

fn gram(c: &mut Criterion) {
    let k = KernelSpec::se(1.0, 0.3);
    let mut group = c.benchmark_group("gram_self");
    for n in [50, 200] {
        let x = uniform_grid(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| k.gram_self(Points::scalar(black_box(x))).unwrap())
        });
    }
    group.finish();
}

fn marginal(c: &mut Criterion) {
    let k = KernelSpec::se(1.0, 0.3);
    let x = uniform_grid(100);
    let y = DMatrix::from_fn(100, 1, |i, _| (3.0 * x[i]).sin());
    let inducing = uniform_grid(20);
    c.bench_function("log_marginal_grad_n100", |b| {
        b.iter(|| log_marginal_grad(&k, 10.0, Points::scalar(&x), black_box(&y)).unwrap())
    });
    c.bench_function("sparse_bound_grad_n100_m20", |b| {
        b.iter(|| sparse_bound_grad(&k, 10.0, Points::scalar(&inducing), Points::scalar(&x), black_box(&y)).unwrap())
    });
}

fn model_gradient(c: &mut Criterion) {
    let data = dataset(5, 50, 1);
    let config = FitConfig::default();
    let state = initialize(&data, &config).unwrap();
    c.bench_function("model_gradient_j5_n50", |b| {
        b.iter(|| gradient(black_box(&state), &data, &config.model).unwrap())
    });
    let sparse = ModelConfig { inducing_count: Some(15), ..config.model.clone() };
    c.bench_function("model_gradient_j5_n50_sparse15", |b| {
        b.iter(|| gradient(black_box(&state), &data, &sparse).unwrap())
    });
}

fn dtw(c: &mut Criterion) {
    let data = dataset(2, 100, 2);
    c.bench_function("dtw_n100", |b| b.iter(|| dtw_align(black_box(&data.y[0]), &data.y[1]).unwrap()));
}

criterion_group!(benches, gram, marginal, model_gradient, dtw);
criterion_main!(benches);
