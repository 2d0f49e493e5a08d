//! Gram-CTC: a CTC-style sequence loss whose output symbols are *grams*
//! (short runs of base units) rather than single units. The loss marginalizes
//! over both alignments and decompositions of the target into grams.

pub mod checks;
pub mod cli;
pub mod decode;
pub mod error;
pub mod gramselect;
pub mod lattice;
pub mod logspace;
pub mod loss;
pub mod matrix;
pub mod oracle;
pub mod refctc;
pub mod toytrain;
pub mod vocab;

pub use error::{Error, Result};
pub use lattice::{Lattice, LatticeState};
pub use loss::{
    gram_ctc_loss_grad, likelihood, log_softmax, FBResult, LogitsMatrix, LossGrad, PosteriorMatrix,
};
pub use matrix::Matrix;
pub use vocab::{Gram, GramVocab, Label, BLANK_ID};
