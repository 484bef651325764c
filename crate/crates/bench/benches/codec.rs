use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use perfrnn_bench::performance;
use perfrnn_core::vocab::{decode, encode};
use perfrnn_core::QuantizationConfig;
use std::hint::black_box;

fn codec(c: &mut Criterion) {
    let q = QuantizationConfig::default();
    let notes = performance(30.0, 1);
    let seq = encode(&notes, &q);
    let mut g = c.benchmark_group("codec_30s");
    g.throughput(Throughput::Elements(seq.len() as u64));
    g.bench_function("encode", |b| b.iter(|| encode(black_box(&notes), &q)));
    g.bench_function("decode", |b| b.iter(|| decode(black_box(&seq), &q, true).unwrap()));
    g.finish();
}

criterion_group!(benches, codec);
criterion_main!(benches);
