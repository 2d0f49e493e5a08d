//! Trains the context-window toy model with Gram-CTC on synthetic data and
//! reports the loss curve and held-out CER.
//!
//! ```bash
//! cargo run --release --example toy_training -- [epochs] [window]
//! ```

use gram_ctc::toytrain::{
    evaluate_cer, synth_dataset, train, LossSpec, SynthConfig, ToyModel, TrainConfig,
};
use gram_ctc::GramVocab;

fn main() -> gram_ctc::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(10, |a| a.parse().expect("epochs"));
    let window = args.next().map_or(5, |a| a.parse().expect("window"));

    let train_cfg = SynthConfig::acceptance(200, 1);
    let test_cfg = SynthConfig::acceptance(50, 2);
    let train_set = synth_dataset(&train_cfg)?;
    let test_set = synth_dataset(&test_cfg)?;

    let units = &train_cfg.base_units;
    let mut grams: Vec<String> = units.iter().map(|c| c.to_string()).collect();
    for a in units {
        for b in units {
            grams.push(format!("{a}{b}"));
        }
    }
    let vocab = GramVocab::build(&grams, units)?;
    let spec = LossSpec::Gram(vocab.clone());

    let config = TrainConfig {
        epochs,
        window,
        ..TrainConfig::default()
    };
    let model = ToyModel::new(window, train_cfg.feature_dim, &spec.head_outputs(), 7)?;
    let outcome = train(model, &train_set, &spec, &config)?;
    for e in &outcome.history {
        println!(
            "epoch {:>3}  loss {:>10.4}  {:.2}s",
            e.epoch, e.loss, e.seconds
        );
    }
    let first = outcome.history[0].loss;
    let last = outcome.history.last().map_or(first, |e| e.loss);
    println!("final / first loss: {:.4}", last / first);

    let report = evaluate_cer(&outcome.model, &test_set, &vocab, 1)?;
    println!("held-out CER: {:.4}", report.cer);
    for s in report.per_sample.iter().take(5) {
        println!("  {:<10} -> {}", s.reference, s.hypothesis);
    }
    Ok(())
}
