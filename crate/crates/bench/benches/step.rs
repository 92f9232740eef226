use std::hint::black_box;

use atmc_bench::{moons_model, sampler_config};
use atmc_core::{Batch, Chain, GaussianTarget, Method, NoiseModel, Target};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn gaussian_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("gaussian_step");
    for dim in [1usize, 100, 10_000] {
        let target = GaussianTarget::standard(dim);
        for method in Method::ALL {
            let config = sampler_config(method, 0.01, u64::MAX);
            let mut chain = Chain::new(&config, &target, &NoiseModel::None).unwrap();
            group.bench_with_input(BenchmarkId::new(method.label(), dim), &dim, |b, _| b.iter(|| black_box(chain.step().unwrap())));
        }
    }
    group.finish();
}

fn mlp_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("mlp_gradient");
    for width in [16usize, 64] {
        let (model, theta) = moons_model(256, width, 1);
        let batch: Vec<usize> = (0..32).collect();
        let mut grad = vec![0.0; model.dim()];
        group.bench_with_input(BenchmarkId::new("batch32", width), &width, |b, _| {
            b.iter(|| black_box(model.minibatch_gradient(&theta, Batch::Indices(&batch), &mut grad).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, gaussian_steps, mlp_gradient);
criterion_main!(benches);
