use std::hint::black_box;

use cnnma::anneal::{
    anneal_run, sa_run, AnnealConfig, Benchmark, BenchmarkObjective, CnnObjective,
};
use cnnma::cnn::{backprop_grads, sgd_step};
use cnnma::{Architecture, Network};
use cnnma_bench::random_batches;
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

fn network() -> Network {
    Network::init(Architecture::mnist(), 1).unwrap()
}

fn cnn(c: &mut Criterion) {
    let net = network();
    let batch = random_batches(1, 100, 2).remove(0);
    c.bench_function("forward_batch_100", |b| {
        b.iter(|| net.forward(black_box(&batch.inputs)).unwrap())
    });
    c.bench_function("backprop_batch_100", |b| {
        b.iter(|| backprop_grads(&net, black_box(&batch)).unwrap())
    });
    c.bench_function("sgd_step_batch_100", |b| {
        b.iter_batched(
            || net.clone(),
            |mut n| sgd_step(&mut n, &batch, 1.0).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn annealers(c: &mut Criterion) {
    let x0 = vec![0.5; 10];
    let cfg = AnnealConfig {
        max_iterations: 200,
        delta_scale: 0.05,
        epsilon: f64::NEG_INFINITY,
        ..AnnealConfig::default()
    };
    let mut sphere = BenchmarkObjective {
        kind: Benchmark::Sphere,
        dim: 10,
    };
    c.bench_function("anneal_sphere10_2000_candidates", |b| {
        b.iter(|| anneal_run(&mut sphere, black_box(&x0), &cfg).unwrap())
    });
    c.bench_function("sa_sphere10_2000_candidates", |b| {
        b.iter(|| sa_run(&mut sphere, black_box(&x0), &cfg).unwrap())
    });

    // one refinement pass with the default budget: 10 loops of 10 candidates
    let net = network();
    let batches = random_batches(10, 100, 3);
    let x = net.flatten().values;
    let refine = AnnealConfig {
        epsilon: f64::NEG_INFINITY,
        ..AnnealConfig::default()
    };
    let mut group = c.benchmark_group("cnn_refinement");
    group.sample_size(10);
    group.bench_function("default_budget", |b| {
        b.iter_batched(
            || CnnObjective::new(&net, batches.clone()).unwrap(),
            |mut obj| anneal_run(&mut obj, &x, &refine).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, cnn, annealers);
criterion_main!(benches);
