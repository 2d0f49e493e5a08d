//! Checks the forward-backward likelihood against exhaustive path
//! enumeration, normalization over all labels, and the analytic gradient
//! against finite differences, on seeded random instances.
//!
//! ```bash
//! cargo run --release --example oracle_check -- [seed]
//! ```

use gram_ctc::checks::{grad_check, normalize_check, oracle_check, InstanceShape};
use gram_ctc::oracle::{brute_force_label_distribution, DEFAULT_PATH_CAP};
use gram_ctc::{log_softmax, GramVocab, LogitsMatrix};

fn main() -> gram_ctc::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .map_or(7, |a| a.parse().expect("seed"));

    let reports = [
        oracle_check(seed, 200, &InstanceShape::tiny(6), 1e-9)?,
        normalize_check(seed, 50, &InstanceShape::tiny(4), 1e-9)?,
        grad_check(
            seed,
            20,
            &InstanceShape {
                max_symbols: 6,
                max_gram_len: 5,
                ..InstanceShape::tiny(6)
            },
            1e-5,
            1e-4,
        )?,
    ];
    for r in &reports {
        println!(
            "{:<10} {:>4} instances  max err {:.2e}  {}",
            r.check,
            r.instances,
            r.max_error,
            r.summary()
        );
    }

    // the full label distribution of a two-frame example
    let vocab = GramVocab::build(&["a", "b", "ab"], &['a', 'b'])?;
    let logits = LogitsMatrix::from_rows(&[[0.0, 1.0, 0.5, 0.2], [0.3, 0.0, 1.0, 0.8]])?;
    let dist = brute_force_label_distribution(&log_softmax(&logits), &vocab, DEFAULT_PATH_CAP)?;
    for (label, p) in &dist {
        println!("  p({:?}) = {p:.6}", label.to_string());
    }
    println!("  total = {:.15}", dist.values().sum::<f64>());
    Ok(())
}
