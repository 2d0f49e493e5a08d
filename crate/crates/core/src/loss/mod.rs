//! Gram-CTC likelihood and gradient.
//!
//! Everything runs in the natural-log domain. `log_alpha[t][s]` and
//! `log_beta[t][s]` both include the emission at frame `t`, so
//! `alpha * beta / y` summed over states gives the likelihood at every frame.

mod joint;
mod logits_file;

pub use joint::{joint_loss, JointLossGrad, JointTerm};
pub use logits_file::{read_matrix, write_matrix, MatrixFormat};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::logspace::log_sum_exp;
use crate::matrix::Matrix;
use crate::vocab::{GramVocab, Label};

/// Unnormalized network outputs, `T x |G'|`, all finite.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitsMatrix(Matrix);

impl LogitsMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        for r in 0..values.rows() {
            if let Some(c) = values.row(r).iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: r, col: c });
            }
        }
        Ok(LogitsMatrix(values))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn values(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    pub fn frames(&self) -> usize {
        self.0.rows()
    }

    pub fn symbols(&self) -> usize {
        self.0.cols()
    }
}

/// Per-frame log posteriors `ln y_k^t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorMatrix {
    pub log_values: Matrix,
}

impl PosteriorMatrix {
    /// Wraps log-probabilities that are already normalized per row.
    pub fn from_log_probs(log_values: Matrix) -> Self {
        PosteriorMatrix { log_values }
    }

    pub fn frames(&self) -> usize {
        self.log_values.rows()
    }

    pub fn symbols(&self) -> usize {
        self.log_values.cols()
    }

    #[inline]
    pub fn log_prob(&self, t: usize, k: usize) -> f64 {
        self.log_values.get(t, k)
    }

    pub fn prob(&self, t: usize, k: usize) -> f64 {
        self.log_values.get(t, k).exp()
    }
}

pub fn log_softmax(logits: &LogitsMatrix) -> PosteriorMatrix {
    let m = logits.values();
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for t in 0..m.rows() {
        let row = m.row(t);
        let norm = log_sum_exp(row.iter().copied());
        for (o, &u) in out.row_mut(t).iter_mut().zip(row) {
            *o = u - norm;
        }
    }
    PosteriorMatrix { log_values: out }
}

#[derive(Clone, Debug)]
pub struct FBResult {
    pub log_alpha: Matrix,
    pub log_beta: Matrix,
    pub log_likelihood: f64,
    /// `ln Z_t` for every frame; each should equal `log_likelihood`.
    pub z_per_t: Vec<f64>,
    /// Fewest frames that can produce the label.
    pub min_frames: usize,
}

impl FBResult {
    /// False when the label cannot be produced in the available frames.
    pub fn is_feasible(&self) -> bool {
        self.log_likelihood > f64::NEG_INFINITY
    }

    pub fn max_consistency_error(&self) -> f64 {
        self.z_per_t
            .iter()
            .map(|z| (z - self.log_likelihood).abs())
            .fold(0.0, f64::max)
    }
}

/// Negative log-likelihood and its gradient with respect to the logits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossGrad {
    pub loss: f64,
    #[serde(serialize_with = "serialize_rows")]
    pub grad: Matrix,
}

fn serialize_rows<S: serde::Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    m.to_rows().serialize(s)
}

fn check_columns(lattice: &Lattice, post: &PosteriorMatrix) -> Result<()> {
    if post.symbols() != lattice.symbols() {
        return Err(Error::DimensionMismatch {
            expected: lattice.symbols(),
            found: post.symbols(),
        });
    }
    Ok(())
}

#[inline]
fn lse_over(row: &[f64], idx: &[usize]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &i in idx {
        max = max.max(row[i]);
    }
    if max == f64::NEG_INFINITY {
        return max;
    }
    let mut sum = 0.0;
    for &i in idx {
        sum += (row[i] - max).exp();
    }
    max + sum.ln()
}

pub fn forward(lattice: &Lattice, post: &PosteriorMatrix) -> Result<Matrix> {
    check_columns(lattice, post)?;
    let frames = post.frames();
    let states = lattice.states();
    let mut alpha = Matrix::filled(frames, states.len(), f64::NEG_INFINITY);
    if frames == 0 {
        return Ok(alpha);
    }
    for &s in lattice.initials() {
        alpha.set(0, s, post.log_prob(0, states[s].gram_id));
    }
    for t in 1..frames {
        let (prev, cur) = alpha.as_mut_slice().split_at_mut(t * states.len());
        let prev = &prev[(t - 1) * states.len()..];
        let cur = &mut cur[..states.len()];
        let y = post.log_values.row(t);
        for (s, st) in states.iter().enumerate() {
            let acc = lse_over(prev, lattice.preds(s));
            cur[s] = if acc == f64::NEG_INFINITY {
                acc
            } else {
                acc + y[st.gram_id]
            };
        }
    }
    Ok(alpha)
}

pub fn backward(lattice: &Lattice, post: &PosteriorMatrix) -> Result<Matrix> {
    check_columns(lattice, post)?;
    let frames = post.frames();
    let states = lattice.states();
    let mut beta = Matrix::filled(frames, states.len(), f64::NEG_INFINITY);
    if frames == 0 {
        return Ok(beta);
    }
    for &s in lattice.finals() {
        beta.set(frames - 1, s, post.log_prob(frames - 1, states[s].gram_id));
    }
    for t in (0..frames - 1).rev() {
        let (cur, next) = beta.as_mut_slice().split_at_mut((t + 1) * states.len());
        let cur = &mut cur[t * states.len()..];
        let next = &next[..states.len()];
        let y = post.log_values.row(t);
        for (s, st) in states.iter().enumerate() {
            let acc = lse_over(next, lattice.succs(s));
            cur[s] = if acc == f64::NEG_INFINITY {
                acc
            } else {
                acc + y[st.gram_id]
            };
        }
    }
    Ok(beta)
}

/// Runs both recursions and the per-frame consistency sums.
///
/// An unreachable label is not an error here: the result carries
/// `log_likelihood == -inf` and [`FBResult::is_feasible`] is false.
pub fn likelihood(lattice: &Lattice, post: &PosteriorMatrix) -> Result<FBResult> {
    let log_alpha = forward(lattice, post)?;
    let log_beta = backward(lattice, post)?;
    let frames = post.frames();
    let states = lattice.states();

    let log_likelihood = if frames == 0 {
        if lattice.label().is_empty() {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        lse_over(log_alpha.row(frames - 1), lattice.finals())
    };

    let z_per_t = (0..frames)
        .map(|t| {
            let a = log_alpha.row(t);
            let b = log_beta.row(t);
            log_sum_exp(
                states
                    .iter()
                    .enumerate()
                    .map(|(s, st)| a[s] + b[s] - post.log_prob(t, st.gram_id)),
            )
        })
        .collect();

    Ok(FBResult {
        log_alpha,
        log_beta,
        log_likelihood,
        z_per_t,
        min_frames: lattice.min_path_length(),
    })
}

/// Loss and gradient for a prebuilt lattice.
pub fn loss_grad_for_lattice(lattice: &Lattice, logits: &LogitsMatrix) -> Result<LossGrad> {
    if logits.symbols() != lattice.symbols() {
        return Err(Error::DimensionMismatch {
            expected: lattice.symbols(),
            found: logits.symbols(),
        });
    }
    let post = log_softmax(logits);
    let fb = likelihood(lattice, &post)?;
    if !fb.is_feasible() {
        return Err(Error::ImpossibleAlignment {
            frames: post.frames(),
            required: fb.min_frames,
        });
    }

    let frames = post.frames();
    let symbols = post.symbols();
    let mut grad = Matrix::zeros(frames, symbols);
    let mut occupancy = vec![f64::NEG_INFINITY; symbols];
    for t in 0..frames {
        let a = fb.log_alpha.row(t);
        let b = fb.log_beta.row(t);
        let log_z = fb.z_per_t[t];
        for (k, occ) in occupancy.iter_mut().enumerate() {
            let members = lattice.states_with_gram(k);
            *occ = if members.is_empty() {
                f64::NEG_INFINITY
            } else {
                log_sum_exp(members.iter().map(|&s| a[s] + b[s]))
            };
        }
        let row = grad.row_mut(t);
        for k in 0..symbols {
            let log_y = post.log_prob(t, k);
            let target = if occupancy[k] == f64::NEG_INFINITY {
                0.0
            } else {
                (occupancy[k] - log_y - log_z).exp()
            };
            row[k] = log_y.exp() - target;
        }
    }

    Ok(LossGrad {
        loss: -fb.log_likelihood,
        grad,
    })
}

/// `-ln p(label | logits)` and its gradient with respect to the logits.
pub fn gram_ctc_loss_grad(
    logits: &LogitsMatrix,
    label: &Label,
    vocab: &GramVocab,
) -> Result<LossGrad> {
    if logits.symbols() != vocab.total_symbols() {
        return Err(Error::DimensionMismatch {
            expected: vocab.total_symbols(),
            found: logits.symbols(),
        });
    }
    let lattice = Lattice::build(vocab, label);
    loss_grad_for_lattice(&lattice, logits)
}
