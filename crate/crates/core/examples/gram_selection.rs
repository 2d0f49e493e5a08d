//! Automatic gram selection on a corpus where "th" is planted as the dominant
//! bigram and rendered as a single sound: count grams, prune rare ones, train
//! a toy model with the candidate set, then keep only the grams the model
//! actually emits.
//!
//! ```bash
//! cargo run --release --example gram_selection
//! ```

use gram_ctc::gramselect::{refine_pipeline, FilterPolicy, RefineConfig};
use gram_ctc::toytrain::{SynthConfig, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn planted_corpus(units: &[char], lines: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..lines)
        .map(|_| {
            let words: Vec<String> = (0..rng.random_range(2..5))
                .map(|_| {
                    let mut w: String = (0..rng.random_range(1..4))
                        .map(|_| units[rng.random_range(0..units.len())])
                        .collect();
                    if rng.random_bool(0.7) {
                        let at = rng.random_range(0..=w.len());
                        w.insert_str(at, "th");
                    }
                    w
                })
                .collect();
            words.join(" ")
        })
        .collect()
}

fn main() -> gram_ctc::Result<()> {
    let units = vec!['a', 'e', 'h', 'n', 's', 't'];
    let corpus = planted_corpus(&units, 60, 3);
    println!("corpus sample: {:?}", &corpus[..3]);

    let config = RefineConfig {
        synth: SynthConfig {
            base_units: units.clone(),
            // "th" is one sound, as in speech
            fused_grams: vec!["th".into()],
            feature_dim: units.len() + 1,
            ..SynthConfig::acceptance(0, 5)
        },
        train: TrainConfig {
            epochs: 30,
            ..TrainConfig::default()
        },
    };
    let outcome = refine_pipeline(
        &corpus,
        2,
        &FilterPolicy::MinCount(3),
        &config,
        &FilterPolicy::MinCount(2),
    )?;

    let top: Vec<_> = outcome.corpus_stats.ranked().into_iter().take(8).collect();
    println!("most frequent corpus grams: {top:?}");
    println!(
        "initial ({}): {:?}",
        outcome.report.initial.len(),
        outcome.report.initial
    );
    println!(
        "kept    ({}): {:?}",
        outcome.report.kept.len(),
        outcome.report.kept
    );
    println!(
        "dropped ({}): {:?}",
        outcome.report.dropped.len(),
        outcome.report.dropped
    );
    println!(
        "loss {:.3} -> {:.3}",
        outcome.report.epoch_losses[0],
        outcome.report.epoch_losses.last().unwrap()
    );
    println!("usage: {:?}", outcome.usage.ranked());
    println!("\"th\" kept: {}", outcome.vocab.id_of_str("th").is_some());
    Ok(())
}
