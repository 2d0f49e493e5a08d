//! Desk-scale training harness: synthetic features, a context-window linear
//! model trained through the loss with Nesterov momentum, and CER scoring.

mod model;
mod synth;
mod train;

pub use model::{LinearHead, ToyModel};
pub use synth::{
    apply_stride, read_dataset, render_labels, synth_dataset, write_dataset, Sample, SynthConfig,
};
pub use train::{
    evaluate_cer, levenshtein, sample_loss_grad, train, CerReport, EpochRecord, LossSpec,
    SampleEdits, SampleGrad, TrainConfig, TrainOutcome,
};
