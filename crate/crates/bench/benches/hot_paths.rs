use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use complabel_bench::{comp_fixture, model_fixture};
use complabel_core::optim::{adam_step, train, AdamConfig, AdamState, Supervision, TrainConfig};
use complabel_core::{
    comp_loss, comp_loss_grad, objective_gradient, validation_score, Architecture, Batch, BinaryLossKind, Dataset,
    LossSpec, Scheme,
};

fn losses(c: &mut Criterion) {
    let mut group = c.benchmark_group("comp_loss");
    for k in [3, 10] {
        let scores: Vec<f64> = (0..k).map(|i| (i as f64 * 0.37).sin()).collect();
        for spec in [LossSpec::ova(BinaryLossKind::Sigmoid), LossSpec::pc(BinaryLossKind::Sigmoid)] {
            group.bench_with_input(BenchmarkId::new(format!("{spec}/value"), k), &scores, |b, g| {
                b.iter(|| comp_loss(spec, black_box(g), 1).unwrap())
            });
            group.bench_with_input(BenchmarkId::new(format!("{spec}/grad"), k), &scores, |b, g| {
                b.iter(|| comp_loss_grad(spec, black_box(g), 1).unwrap())
            });
        }
    }
    group.finish();
}

fn gradients(c: &mut Criterion) {
    let (k, d) = (5, 10);
    let (train_set, _) = comp_fixture(k, d, 200);
    let samples = train_set.samples();
    let batch = Batch { ord: Vec::new(), comp: samples[..100].to_vec() };
    let mut group = c.benchmark_group("objective_gradient");
    for arch in [Architecture::Linear, Architecture::Mlp] {
        let model = model_fixture(arch, k, d);
        group.bench_function(arch.name(), |b| {
            b.iter(|| objective_gradient(&model, black_box(&batch), LossSpec::pc(BinaryLossKind::Sigmoid), 0.0, 1e-4))
        });
    }
    group.finish();
}

fn steps(c: &mut Criterion) {
    let (k, d) = (5, 10);
    let (train_set, val_set) = comp_fixture(k, d, 200);
    let model = model_fixture(Architecture::Linear, k, d);
    let grad: Vec<f64> = (0..model.params().len()).map(|i| (i as f64).cos()).collect();
    c.bench_function("adam_step", |b| {
        let mut params = model.params().to_vec();
        let mut state = AdamState::new(params.len());
        let cfg = AdamConfig::default();
        b.iter(|| adam_step(&mut params, black_box(&grad), &mut state, &cfg).unwrap())
    });
    let val_samples = val_set.samples();
    let val_scores: Vec<(Vec<f64>, usize)> = val_samples.iter().map(|&(x, y)| (model.scores(x).unwrap(), y)).collect();
    c.bench_function("validation_score", |b| {
        b.iter(|| validation_score(Scheme::Pc, black_box(&val_scores), k).unwrap())
    });
    let config = TrainConfig { iterations: 100, ..TrainConfig::new(LossSpec::pc(BinaryLossKind::Sigmoid)) };
    c.bench_function("train_100_iterations", |b| {
        b.iter(|| {
            train(&model, Supervision::complementary(&train_set), Supervision::complementary(&val_set), &config, 1e-4)
                .unwrap()
        })
    });
}

criterion_group!(benches, losses, gradients, steps);
criterion_main!(benches);
