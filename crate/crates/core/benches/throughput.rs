//! Training and evaluation throughput: the sequential single-worker path
//! against data-parallel multi-worker runs on the same synthetic corpus.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use clwe_core::synth::{ciphered_benchmark, CipheredConfig};
use clwe_core::trainer::{train, Mode, SessionOptions, TrainingConfig};
use clwe_core::{build_noise_table, eval};

fn bench_config(workers: usize) -> TrainingConfig {
    TrainingConfig {
        dim: 50,
        window: 16,
        negatives: 5,
        epochs: 1,
        mode: Mode::EmSelection,
        workers,
        ..TrainingConfig::default()
    }
}

fn bench_training(c: &mut Criterion) {
    let benchmark = ciphered_benchmark(&CipheredConfig {
        tokens: 200_000,
        ..CipheredConfig::default()
    });
    let (vocab, streams, dict) = benchmark.prepare(5);
    let noise = build_noise_table(&vocab, 1.0);
    let tokens: u64 = streams.iter().map(|s| s.token_count()).sum();

    let mut group = c.benchmark_group("train_epoch");
    group.sample_size(10);
    group.throughput(Throughput::Elements(tokens));
    let worker_counts: &[usize] = if cfg!(feature = "parallel") {
        &[1, 2, 4]
    } else {
        &[1]
    };
    for &workers in worker_counts {
        group.bench_with_input(
            BenchmarkId::new("workers", workers),
            &workers,
            |b, &workers| {
                let cfg = bench_config(workers);
                b.iter(|| {
                    train(
                        &cfg,
                        &vocab,
                        &streams,
                        Some(&dict),
                        &noise,
                        &SessionOptions::default(),
                    )
                    .unwrap()
                });
            },
        );
    }
    group.finish();
}

fn bench_bli_eval(c: &mut Criterion) {
    let benchmark = ciphered_benchmark(&CipheredConfig {
        tokens: 100_000,
        ..CipheredConfig::default()
    });
    let (vocab, streams, dict) = benchmark.prepare(5);
    let noise = build_noise_table(&vocab, 1.0);
    let cfg = bench_config(1);
    let run = train(
        &cfg,
        &vocab,
        &streams,
        Some(&dict),
        &noise,
        &SessionOptions::default(),
    )
    .unwrap();
    let emb = run.matrices.u.to_dense();
    let test = eval::BliTestSet {
        pairs: benchmark.test_pairs.clone(),
        source_lang: clwe_core::Lang::E,
        target_lang: clwe_core::Lang::F,
    };

    let mut group = c.benchmark_group("bli_recall");
    group.sample_size(10);
    group.throughput(Throughput::Elements(test.pairs.len() as u64));
    group.bench_function("recall@1,5", |b| {
        b.iter(|| eval::bli_recall(&emb, &vocab, &test, &[1, 5]).unwrap());
    });
    group.finish();
}

criterion_group!(benches, bench_training, bench_bli_eval);
criterion_main!(benches);
