//! End-to-end training on a small ciphered-bilingual corpus: the trained
//! space must recover gold translations, selection quality must beat the
//! random baseline, and fixed-seed single-worker runs must be bit-identical.

use clwe_core::corpus::Lang;
use clwe_core::eval::{bli_recall, BliTestSet};
use clwe_core::synth::{ciphered_benchmark, CipheredBenchmark, CipheredConfig};
use clwe_core::trainer::{train, Mode, SessionOptions, TrainingConfig};
use clwe_core::{build_noise_table, CombineScheme};

fn small_benchmark() -> CipheredBenchmark {
    ciphered_benchmark(&CipheredConfig {
        base_vocab: 500,
        topics: 10,
        tokens: 120_000,
        distractors: 4,
        planted: 4,
        test_pairs: 50,
        min_test_count: 20,
        heldout_per_sense: 5,
        seed: 77,
        ..CipheredConfig::default()
    })
}

fn small_config(mode: Mode) -> TrainingConfig {
    TrainingConfig {
        dim: 32,
        window: 16,
        negatives: 5,
        epochs: 3,
        alpha: 0.5,
        delta: 0.0,
        mode,
        joint: true,
        combine: CombineScheme::U,
        seed: 5,
        workers: 1,
        ..TrainingConfig::default()
    }
}

#[test]
fn em_training_recovers_gold_translations() {
    let bench = small_benchmark();
    let (vocab, streams, dict) = bench.prepare(5);
    let noise = build_noise_table(&vocab, 1.0);
    let run = train(
        &small_config(Mode::EmSelection),
        &vocab,
        &streams,
        Some(&dict),
        &noise,
        &SessionOptions::default(),
    )
    .unwrap();
    let test = BliTestSet {
        pairs: bench.test_pairs.clone(),
        source_lang: Lang::E,
        target_lang: Lang::F,
    };
    let emb = run.matrices.u.to_dense();
    let report = bli_recall(&emb, &vocab, &test, &[1, 5]).unwrap();
    assert!(
        report.recalls[&1] > 0.5,
        "em recall@1 too low: {:?}",
        report.recalls
    );
    assert!(report.recalls[&5] >= report.recalls[&1]);
}

#[test]
fn em_selection_beats_random_selection() {
    let bench = small_benchmark();
    let (vocab, streams, dict) = bench.prepare(5);
    let noise = build_noise_table(&vocab, 1.0);
    let test = BliTestSet {
        pairs: bench.test_pairs.clone(),
        source_lang: Lang::E,
        target_lang: Lang::F,
    };
    let mut recalls = Vec::new();
    for mode in [Mode::EmSelection, Mode::RandomSelection] {
        let run = train(
            &small_config(mode),
            &vocab,
            &streams,
            Some(&dict),
            &noise,
            &SessionOptions::default(),
        )
        .unwrap();
        let emb = run.matrices.u.to_dense();
        let report = bli_recall(&emb, &vocab, &test, &[1]).unwrap();
        recalls.push(report.recalls[&1]);
    }
    assert!(
        recalls[0] > recalls[1],
        "em {} vs random {}",
        recalls[0],
        recalls[1]
    );
}

#[test]
fn bilingual_training_is_bit_deterministic_with_one_worker() {
    let bench = small_benchmark();
    let (vocab, streams, dict) = bench.prepare(5);
    let noise = build_noise_table(&vocab, 1.0);
    let mut cfg = small_config(Mode::EmSelection);
    cfg.epochs = 1;
    cfg.delta = 0.01;
    let a = train(&cfg, &vocab, &streams, Some(&dict), &noise, &SessionOptions::default()).unwrap();
    let b = train(&cfg, &vocab, &streams, Some(&dict), &noise, &SessionOptions::default()).unwrap();
    assert_eq!(a.matrices.u.to_dense(), b.matrices.u.to_dense());
    assert_eq!(a.matrices.v.to_dense(), b.matrices.v.to_dense());
}

#[test]
fn checkpoints_are_written_every_epoch() {
    let bench = ciphered_benchmark(&CipheredConfig {
        base_vocab: 100,
        topics: 5,
        tokens: 5_000,
        distractors: 2,
        planted: 2,
        test_pairs: 5,
        min_test_count: 2,
        heldout_per_sense: 1,
        seed: 9,
        ..CipheredConfig::default()
    });
    let (vocab, streams, dict) = bench.prepare(1);
    let noise = build_noise_table(&vocab, 1.0);
    let mut cfg = small_config(Mode::EmSelection);
    cfg.epochs = 2;
    cfg.dim = 8;
    let dir = tempfile::tempdir().unwrap();
    let session = SessionOptions {
        checkpoint_dir: Some(dir.path().to_path_buf()),
        verbose: false,
    };
    train(&cfg, &vocab, &streams, Some(&dict), &noise, &session).unwrap();
    for epoch in 1..=2 {
        for matrix in ["v", "u"] {
            let path = dir.path().join(format!("epoch{epoch:02}.{matrix}.txt"));
            assert!(path.exists(), "missing checkpoint {path:?}");
            let (forms, m) = clwe_core::model::load_embeddings(&path).unwrap();
            assert_eq!(forms.len(), vocab.len());
            assert_eq!(m.dim(), 8);
        }
    }
}
