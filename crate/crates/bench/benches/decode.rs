use std::hint::black_box;

use contrast_bench::ramp_table;
use contrast_core::testing::{biased_pope_fixture, visual, Probe, PREFIX};
use contrast_core::{
    decode_sequence, plausibility_head, softmax, step_distribution, DecodeConfig, LogitSource,
    TreeTemplate,
};
use contrast_core::eval::run_pope;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn numerics(c: &mut Criterion) {
    let mut group = c.benchmark_group("numerics");
    for vocab in [32, 1024, 32000] {
        let table = ramp_table(vocab);
        let logits = table.default_logits().clone();
        let dist = softmax(&logits).unwrap();
        group.bench_with_input(BenchmarkId::new("softmax", vocab), &logits, |b, l| {
            b.iter(|| softmax(black_box(l)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("plausibility_head", vocab), &dist, |b, d| {
            b.iter(|| plausibility_head(black_box(d), 0.1))
        });
    }
    group.finish();
}

fn decoding(c: &mut Criterion) {
    let mut group = c.benchmark_group("decode");
    let v = visual("img");
    for vocab in [32, 1024, 32000] {
        let table = ramp_table(vocab);
        for (name, template) in [
            ("standard", TreeTemplate::standard()),
            ("icd", TreeTemplate::icd(PREFIX, 1.0)),
        ] {
            let tree = template.instantiate(&v, "Describe the image.").unwrap();
            let config = DecodeConfig {
                max_tokens: 16,
                top_p: 0.9,
                ..DecodeConfig::default()
            };
            group.bench_function(BenchmarkId::new(format!("step/{name}"), vocab), |b| {
                b.iter(|| step_distribution(&tree, &table, &[], &config).unwrap())
            });
            group.bench_function(BenchmarkId::new(format!("sequence16/{name}"), vocab), |b| {
                b.iter(|| decode_sequence(&tree, &table, &config).unwrap())
            });
        }
    }
    group.finish();
}

fn pope(c: &mut Criterion) {
    let probes: Vec<Probe> = (0..200)
        .map(|i| [Probe::Present, Probe::Absent, Probe::CoOccurring][i % 3])
        .collect();
    let (table, items) = biased_pope_fixture(&probes);
    let template = TreeTemplate::icd(PREFIX, 1.0);
    let config = DecodeConfig::default();
    assert_eq!(table.info().vocab_size, 3);
    let mut group = c.benchmark_group("pope200");
    for workers in [1, 4] {
        group.bench_function(BenchmarkId::new("icd", workers), |b| {
            b.iter(|| run_pope(&items, &template, &table, &config, workers).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, numerics, decoding, pope);
criterion_main!(benches);
