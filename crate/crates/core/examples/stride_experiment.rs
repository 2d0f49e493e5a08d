//! Compares stride-1 uni-gram CTC against stride-2 Gram-CTC on the same
//! synthetic data: held-out CER and wall-time per epoch.
//!
//! ```bash
//! cargo run --release --example stride_experiment -- [epochs]
//! ```

use gram_ctc::toytrain::{
    evaluate_cer, synth_dataset, train, LossSpec, SynthConfig, ToyModel, TrainConfig, TrainOutcome,
};
use gram_ctc::GramVocab;

fn mean_epoch_seconds(o: &TrainOutcome) -> f64 {
    o.history.iter().map(|e| e.seconds).sum::<f64>() / o.history.len() as f64
}

fn main() -> gram_ctc::Result<()> {
    let epochs = std::env::args()
        .nth(1)
        .map_or(40, |a| a.parse().expect("epochs"));
    let synth = SynthConfig::acceptance(200, 1);
    let train_set = synth_dataset(&synth)?;
    let test_set = synth_dataset(&SynthConfig::acceptance(50, 2))?;
    let units = synth.base_units.clone();

    let mut grams: Vec<String> = units.iter().map(|c| c.to_string()).collect();
    grams.extend(
        units
            .iter()
            .flat_map(|a| units.iter().map(move |b| format!("{a}{b}"))),
    );
    let gram_vocab = GramVocab::build(&grams, &units)?;
    let unigram = GramVocab::unigram(&units)?;

    let runs = [
        (
            "ctc   stride 1",
            LossSpec::Ctc(units.clone()),
            1,
            5,
            unigram,
        ),
        (
            "gram  stride 1",
            LossSpec::Gram(gram_vocab.clone()),
            1,
            5,
            gram_vocab.clone(),
        ),
        (
            "gram  stride 2",
            LossSpec::Gram(gram_vocab.clone()),
            2,
            3,
            gram_vocab,
        ),
    ];
    for (name, spec, stride, window, vocab) in runs {
        let config = TrainConfig {
            epochs,
            stride,
            window,
            ..TrainConfig::default()
        };
        let model = ToyModel::new(window, synth.feature_dim * stride, &spec.head_outputs(), 7)?;
        let outcome = train(model, &train_set, &spec, &config)?;
        let cer = evaluate_cer(&outcome.model, &test_set, &vocab, stride)?.cer;
        println!(
            "{name}: CER {:.4}  final loss {:.4}  {:.4}s/epoch  skipped {}",
            cer,
            outcome.history.last().map_or(f64::NAN, |e| e.loss),
            mean_epoch_seconds(&outcome),
            outcome.skipped_total()
        );
    }
    Ok(())
}
