use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use perfrnn_bench::{model, performance, random_codes};
use perfrnn_core::preprocess::Clip;
use perfrnn_core::train::{make_batch, train_step};
use perfrnn_core::{AugmentationMode, AugmentationPolicy, TrainingConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn forward_backward(c: &mut Criterion) {
    let codes = random_codes(300, 413, 3);
    let mut g = c.benchmark_group("lstm_300_steps");
    g.throughput(Throughput::Elements(codes.len() as u64 - 1));
    g.sample_size(20);
    for (layers, cells) in [(2, 128), (3, 512)] {
        let p = model(layers, cells, 4);
        let id = format!("{layers}x{cells}");
        g.bench_with_input(BenchmarkId::new("forward", &id), &codes, |b, codes| {
            b.iter(|| p.forward_sequence(black_box(codes)).unwrap())
        });
        let trace = p.forward_sequence(&codes).unwrap();
        g.bench_with_input(BenchmarkId::new("backward", &id), &codes, |b, codes| {
            b.iter(|| p.backward(black_box(&trace), codes).unwrap())
        });
    }
    g.finish();
}

fn training_step(c: &mut Criterion) {
    let clip = Clip::new(performance(30.0, 5), 30.0);
    let cfg = TrainingConfig {
        batch_size: 8,
        augmentation: AugmentationPolicy::new(AugmentationMode::Less),
        ..TrainingConfig::default()
    };
    let batch = make_batch(&[clip], &cfg, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let mut p = model(2, 128, 7);
    let mut g = c.benchmark_group("train_step");
    g.sample_size(10);
    g.bench_function("2x128_batch8_15s", |b| {
        b.iter(|| train_step(&mut p, black_box(&batch), &TrainingConfig { learning_rate: 0.0, ..cfg }, 0).unwrap())
    });
    g.finish();
}

criterion_group!(benches, forward_backward, training_step);
criterion_main!(benches);
