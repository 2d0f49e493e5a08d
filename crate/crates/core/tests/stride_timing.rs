//! Alone in its binary so no other test competes for the CPU.

mod common;

use gram_ctc::toytrain::{synth_dataset, train, LossSpec, SynthConfig, ToyModel, TrainConfig};

fn median_epoch_seconds(stride: usize, window: usize) -> f64 {
    let cfg = SynthConfig::acceptance(200, 1);
    let data = synth_dataset(&cfg).unwrap();
    let spec = LossSpec::Gram(common::uni_bi_vocab(&cfg.base_units));
    let model = ToyModel::new(window, cfg.feature_dim * stride, &spec.head_outputs(), 7).unwrap();
    let tc = TrainConfig {
        epochs: 15,
        stride,
        window,
        ..TrainConfig::default()
    };
    let out = train(model, &data, &spec, &tc).unwrap();
    assert_eq!(out.skipped_total(), 0);
    let mut s: Vec<f64> = out.history.iter().map(|e| e.seconds).collect();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

#[test]
fn stride_four_roughly_halves_epoch_time_of_stride_two() {
    // windows span about the same raw frames: 3 x 2 and 1 x 4
    let t2 = median_epoch_seconds(2, 3);
    let t4 = median_epoch_seconds(4, 1);
    let ratio = t4 / t2;
    println!("stride-4 / stride-2 epoch time: {ratio:.3}");
    assert!(ratio <= 0.5 * 1.3, "ratio {ratio}");
}
