use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use perfrnn_bench::performance;
use perfrnn_core::midi_io::{extract_performance, parse_smf, write_smf};
use std::hint::black_box;

fn midi(c: &mut Criterion) {
    let notes = performance(300.0, 2);
    let bytes = write_smf(&notes, None);
    let mut g = c.benchmark_group("smf_5min");
    g.throughput(Throughput::Bytes(bytes.len() as u64));
    g.bench_function("parse", |b| b.iter(|| parse_smf(black_box(&bytes)).unwrap()));
    let file = parse_smf(&bytes).unwrap();
    g.bench_function("extract", |b| b.iter(|| extract_performance(black_box(&file))));
    g.bench_function("write", |b| b.iter(|| write_smf(black_box(&notes), None)));
    g.finish();
}

criterion_group!(benches, midi);
criterion_main!(benches);
