//! Joint training: Gram-CTC on one output head plus vanilla CTC on a second
//! head over the same input window, optimized as a weighted sum.
//!
//! ```bash
//! cargo run --release --example joint_training -- [epochs]
//! ```

use gram_ctc::toytrain::{
    evaluate_cer, synth_dataset, train, LossSpec, SynthConfig, ToyModel, TrainConfig,
};
use gram_ctc::GramVocab;

fn main() -> gram_ctc::Result<()> {
    let epochs = std::env::args()
        .nth(1)
        .map_or(20, |a| a.parse().expect("epochs"));
    let synth = SynthConfig::acceptance(200, 1);
    let train_set = synth_dataset(&synth)?;
    let test_set = synth_dataset(&SynthConfig::acceptance(50, 2))?;
    let units = &synth.base_units;

    let mut grams: Vec<String> = units.iter().map(|c| c.to_string()).collect();
    grams.extend(
        units
            .iter()
            .flat_map(|a| units.iter().map(move |b| format!("{a}{b}"))),
    );
    let vocab = GramVocab::build(&grams, units)?;
    let spec = LossSpec::Joint {
        vocab: vocab.clone(),
        gram_weight: 1.0,
        ctc_weight: 1.0,
    };

    let config = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let model = ToyModel::new(config.window, synth.feature_dim, &spec.head_outputs(), 7)?;
    let outcome = train(model, &train_set, &spec, &config)?;
    println!("epoch      joint   gram-ctc        ctc");
    for e in &outcome.history {
        println!(
            "{:>5} {:>10.4} {:>10.4} {:>10.4}",
            e.epoch, e.loss, e.term_losses[0], e.term_losses[1]
        );
    }
    let cer = evaluate_cer(&outcome.model, &test_set, &vocab, 1)?.cer;
    println!("held-out CER (gram head): {cer:.4}");
    Ok(())
}
