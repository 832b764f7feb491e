//! Scratch diagnostics for the synthetic benchmark (not part of the suite).

use clwe_core::corpus::Lang;
use clwe_core::eval::{bli_recall, BliTestSet};
use clwe_core::synth::{ciphered_benchmark, CipheredConfig};
use clwe_core::trainer::{select_translation, train, Mode, SessionOptions, TrainingConfig};
use clwe_core::{build_noise_table, CombineScheme};
use rand::SeedableRng;

fn main() {
    let tokens: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(120_000);
    let epochs: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let env = |k: &str, d: f64| -> f64 {
        std::env::var(k)
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(d)
    };
    let bench = ciphered_benchmark(&CipheredConfig {
        tokens,
        base_vocab: env("VOCAB", 2000.0) as usize,
        topics: env("TOPICS", 20.0) as usize,
        topic_mix: env("MIX", 0.85),
        sentence_len: (env("SLO", 15.0) as usize, env("SHI", 25.0) as usize),
        zipf_exponent: env("ZIPF", 1.0),
        min_test_count: env("MINC", 50.0) as u64,
        seed: env("SEED", 1234.0) as u64,
        ..CipheredConfig::default()
    });
    let (vocab, streams, dict) = bench.prepare(5);
    eprintln!(
        "vocab {} total_tokens {} sentences {}",
        vocab.len(),
        vocab.total_tokens(),
        streams.iter().map(|s| s.len()).sum::<usize>()
    );
    let noise = build_noise_table(&vocab, 1.0);
    let test = BliTestSet {
        pairs: bench.test_pairs.clone(),
        source_lang: Lang::E,
        target_lang: Lang::F,
    };
    for mode in [Mode::EmSelection, Mode::RandomSelection] {
        for delta in [0.0, 0.01] {
            let cfg = TrainingConfig {
                dim: 50,
                window: 16,
                negatives: 5,
                epochs,
                alpha: 0.5,
                delta,
                mode,
                joint: true,
                combine: CombineScheme::U,
                seed: 5,
                workers: 1,
                subsample: env("T", 1e-4),
                ..TrainingConfig::default()
            };
            let start = std::time::Instant::now();
            let run = train(
                &cfg,
                &vocab,
                &streams,
                Some(&dict),
                &noise,
                &SessionOptions::default(),
            )
            .unwrap();
            let u = run.matrices.u.to_dense();
            let v = run.matrices.v.to_dense();
            let ru = bli_recall(&u, &vocab, &test, &[1, 5]).unwrap();
            let rv = bli_recall(&v, &vocab, &test, &[1, 5]).unwrap();

            // selection accuracy on gold pairs: pick among dict candidates
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
            let mut sel_ok = 0;
            for (e, f) in &bench.test_pairs {
                let (eid, fid) = (vocab.id(e).unwrap(), vocab.id(f).unwrap());
                let picked = select_translation(
                    &run.matrices,
                    eid,
                    &[eid],
                    &dict,
                    Lang::E,
                    Mode::EmSelection,
                    &mut rng,
                );
                if picked == Some(fid) {
                    sel_ok += 1;
                }
            }
            // frequency-stratified recall@1 over U
            let mut strata = [[0usize; 2]; 2]; // [frequent,rare] x [hits,total]
            for (e, f) in &bench.test_pairs {
                let (eid, fid) = (vocab.id(e).unwrap(), vocab.id(f).unwrap());
                let hi_freq = vocab.count(eid) >= 500;
                let one = bli_recall(
                    &u,
                    &vocab,
                    &BliTestSet {
                        pairs: vec![(e.clone(), f.clone())],
                        source_lang: Lang::E,
                        target_lang: Lang::F,
                    },
                    &[1],
                )
                .unwrap();
                let s = if hi_freq { 0 } else { 1 };
                strata[s][1] += 1;
                if one.recalls[&1] > 0.5 {
                    strata[s][0] += 1;
                }
                let _ = fid;
            }
            // polysemy: context-sensitive argmax on held-out occurrences
            let k = 8usize;
            let mut poly_ok = 0usize;
            for h in &bench.heldout {
                let ids: Vec<(usize, u32)> = h
                    .tokens
                    .iter()
                    .enumerate()
                    .filter_map(|(i, t)| vocab.id(t).map(|id| (i, id)))
                    .collect();
                let center_slot = ids.iter().position(|&(i, _)| i == h.center).unwrap();
                let center = ids[center_slot].1;
                let lo = center_slot.saturating_sub(k);
                let hi = (center_slot + k + 1).min(ids.len());
                let mut context: Vec<u32> = Vec::new();
                for (slot, &(_, id)) in ids.iter().enumerate().take(hi).skip(lo) {
                    if slot != center_slot {
                        context.push(id);
                    }
                }
                let picked = select_translation(
                    &run.matrices,
                    center,
                    &context,
                    &dict,
                    Lang::E,
                    Mode::EmSelection,
                    &mut rng,
                );
                if picked == vocab.id(&h.gold) {
                    poly_ok += 1;
                }
            }
            eprintln!(
                "mode {:?} delta {}: rec1(U)={:.3} rec5(U)={:.3} rec1(V)={:.3} sel_acc={:.3} poly={:.3} loss={:.4} {:.0} tok/s train {:?} | rec1 freq>=500: {}/{} rare: {}/{}",
                mode,
                delta,
                ru.recalls[&1],
                ru.recalls[&5],
                rv.recalls[&1],
                sel_ok as f64 / bench.test_pairs.len() as f64,
                poly_ok as f64 / bench.heldout.len() as f64,
                run.stats.mean_loss,
                run.stats.tokens_per_sec,
                start.elapsed(),
                strata[0][0], strata[0][1], strata[1][0], strata[1][1],
            );
        }
    }
}
