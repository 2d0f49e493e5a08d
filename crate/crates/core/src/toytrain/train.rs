use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decode::greedy_decode;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::loss::{joint_loss, log_softmax, loss_grad_for_lattice, JointTerm, LogitsMatrix};
use crate::matrix::Matrix;
use crate::refctc::ctc_loss_grad;
use crate::vocab::{GramVocab, Label};

use super::model::ToyModel;
use super::synth::{apply_stride, Sample};

#[derive(Clone, Debug)]
pub enum LossSpec {
    Gram(GramVocab),
    /// Classic CTC over single units; outputs are blank then the units in order.
    Ctc(Vec<char>),
    /// Gram-CTC on head 0 plus unit CTC on head 1.
    Joint {
        vocab: GramVocab,
        gram_weight: f64,
        ctc_weight: f64,
    },
}

impl LossSpec {
    /// Output width of each model head this loss expects.
    pub fn head_outputs(&self) -> Vec<usize> {
        match self {
            LossSpec::Gram(v) => vec![v.total_symbols()],
            LossSpec::Ctc(units) => vec![units.len() + 1],
            LossSpec::Joint { vocab, .. } => {
                vec![vocab.total_symbols(), vocab.base_units().len() + 1]
            }
        }
    }

    /// Vocabulary used to decode head 0.
    pub fn decode_vocab(&self) -> Result<GramVocab> {
        match self {
            LossSpec::Gram(v) | LossSpec::Joint { vocab: v, .. } => Ok(v.clone()),
            LossSpec::Ctc(units) => GramVocab::unigram(units),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub stride: usize,
    /// Odd context width in (strided) frames.
    pub window: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            learning_rate: 1e-3,
            momentum: 0.99,
            stride: 1,
            window: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample loss over the epoch (weighted sum for joint losses).
    pub loss: f64,
    /// Mean of each unweighted loss term.
    pub term_losses: Vec<f64>,
    pub skipped: usize,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: ToyModel,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn skipped_total(&self) -> usize {
        self.history.iter().map(|e| e.skipped).sum()
    }

    /// Loss history as `epoch,loss` CSV.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for e in &self.history {
            s.push_str(&format!("{},{:?}\n", e.epoch, e.loss));
        }
        s
    }
}

/// Loss, per-term losses, and the gradient for every head's parameters.
#[derive(Clone, Debug)]
pub struct SampleGrad {
    pub loss: f64,
    pub term_losses: Vec<f64>,
    pub head_grads: Vec<Vec<f64>>,
}

/// Precomputed per-sample inputs: strided features and lattices.
struct Prepared {
    features: Matrix,
    label: Label,
    lattice: Option<Lattice>,
}

fn prepare(samples: &[Sample], spec: &LossSpec, stride: usize) -> Vec<Prepared> {
    samples
        .iter()
        .map(|s| Prepared {
            features: apply_stride(&s.features, stride),
            label: s.label.clone(),
            lattice: match spec {
                LossSpec::Gram(v) | LossSpec::Joint { vocab: v, .. } => {
                    Some(Lattice::build(v, &s.label))
                }
                LossSpec::Ctc(_) => None,
            },
        })
        .collect()
}

fn check_model(model: &ToyModel, spec: &LossSpec) -> Result<()> {
    let want = spec.head_outputs();
    let have: Vec<usize> = model.heads.iter().map(|h| h.outputs).collect();
    if want != have {
        return Err(Error::InvalidConfig(format!(
            "model heads {have:?} do not match loss outputs {want:?}"
        )));
    }
    Ok(())
}

fn prepared_grad(model: &ToyModel, p: &Prepared, spec: &LossSpec) -> Result<SampleGrad> {
    let head_grad = |head: usize, dlogits: &Matrix| {
        let mut g = vec![0.0; model.heads[head].params.len()];
        model.backprop(head, &p.features, dlogits, &mut g);
        g
    };
    match spec {
        LossSpec::Gram(_) => {
            let logits = LogitsMatrix::new(model.logits(0, &p.features))?;
            let lg = loss_grad_for_lattice(p.lattice.as_ref().expect("gram lattice"), &logits)?;
            Ok(SampleGrad {
                loss: lg.loss,
                term_losses: vec![lg.loss],
                head_grads: vec![head_grad(0, &lg.grad)],
            })
        }
        LossSpec::Ctc(units) => {
            let logits = LogitsMatrix::new(model.logits(0, &p.features))?;
            let lg = ctc_loss_grad(&logits, &p.label, units)?;
            Ok(SampleGrad {
                loss: lg.loss,
                term_losses: vec![lg.loss],
                head_grads: vec![head_grad(0, &lg.grad)],
            })
        }
        LossSpec::Joint {
            vocab,
            gram_weight,
            ctc_weight,
        } => {
            let gram_logits = LogitsMatrix::new(model.logits(0, &p.features))?;
            let ctc_logits = LogitsMatrix::new(model.logits(1, &p.features))?;
            let lattice = p.lattice.as_ref().expect("gram lattice");
            let units = vocab.base_units();
            let joint = joint_loss(vec![
                JointTerm::new(*gram_weight, || {
                    loss_grad_for_lattice(lattice, &gram_logits)
                }),
                JointTerm::new(*ctc_weight, || ctc_loss_grad(&ctc_logits, &p.label, units)),
            ])?;
            Ok(SampleGrad {
                loss: joint.loss,
                term_losses: joint.term_losses.clone(),
                head_grads: vec![head_grad(0, &joint.grads[0]), head_grad(1, &joint.grads[1])],
            })
        }
    }
}

/// Loss and parameter gradient for one sample (features before striding).
pub fn sample_loss_grad(
    model: &ToyModel,
    sample: &Sample,
    spec: &LossSpec,
    stride: usize,
) -> Result<SampleGrad> {
    check_model(model, spec)?;
    let p = prepare(std::slice::from_ref(sample), spec, stride)
        .pop()
        .expect("one sample");
    if p.features.cols() != model.input_dim {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim,
            found: p.features.cols(),
        });
    }
    prepared_grad(model, &p, spec)
}

/// Per-sample SGD with Nesterov momentum: the gradient is taken at the
/// look-ahead point `params + momentum * velocity`, then
/// `velocity = momentum * velocity - lr * grad` and `params += velocity`.
///
/// Samples whose label cannot fit in the strided frame count are skipped and
/// counted. Deterministic under `config.seed`.
pub fn train(
    mut model: ToyModel,
    dataset: &[Sample],
    spec: &LossSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    check_model(&model, spec)?;
    if config.stride == 0 {
        return Err(Error::InvalidConfig("stride must be >= 1".into()));
    }
    if !config.learning_rate.is_finite()
        || config.learning_rate < 0.0
        || !(0.0..1.0).contains(&config.momentum)
    {
        return Err(Error::InvalidConfig(
            "learning rate must be >= 0 and momentum in [0, 1)".into(),
        ));
    }
    let prepared = prepare(dataset, spec, config.stride);
    if let Some(p) = prepared
        .iter()
        .find(|p| p.features.cols() != model.input_dim)
    {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim,
            found: p.features.cols(),
        });
    }

    let mut velocity: Vec<Vec<f64>> = model
        .heads
        .iter()
        .map(|h| vec![0.0; h.params.len()])
        .collect();
    let mut lookahead = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let terms = spec.head_outputs().len();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut losses: Vec<Option<(f64, Vec<f64>)>> = vec![None; prepared.len()];
        let mut skipped = 0;

        for &idx in &order {
            for ((la, cur), vel) in lookahead.heads.iter_mut().zip(&model.heads).zip(&velocity) {
                for ((l, &c), &v) in la.params.iter_mut().zip(&cur.params).zip(vel) {
                    *l = c + config.momentum * v;
                }
            }
            let g = match prepared_grad(&lookahead, &prepared[idx], spec) {
                Ok(g) => g,
                Err(Error::ImpossibleAlignment { .. }) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if !g.loss.is_finite() {
                return Err(Error::Diverged { epoch, sample: idx });
            }
            for ((head, vel), grad) in model.heads.iter_mut().zip(&mut velocity).zip(&g.head_grads)
            {
                for ((p, v), &gr) in head.params.iter_mut().zip(vel.iter_mut()).zip(grad) {
                    *v = config.momentum * *v - config.learning_rate * gr;
                    *p += *v;
                }
            }
            losses[idx] = Some((g.loss, g.term_losses));
        }

        let used: Vec<&(f64, Vec<f64>)> = losses.iter().flatten().collect();
        let n = used.len().max(1) as f64;
        let loss = used.iter().map(|(l, _)| l).sum::<f64>() / n;
        let term_losses = (0..terms)
            .map(|k| used.iter().map(|(_, t)| t[k]).sum::<f64>() / n)
            .collect();
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                sample: usize::MAX,
            });
        }
        history.push(EpochRecord {
            epoch,
            loss,
            term_losses,
            skipped,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainOutcome { model, history })
}

/// Unit-level edit distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleEdits {
    pub reference: String,
    pub hypothesis: String,
    pub edits: usize,
    pub reference_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CerReport {
    /// Mean over samples of `edits / reference_len`.
    pub cer: f64,
    pub per_sample: Vec<SampleEdits>,
}

/// Greedy-decodes head 0 and scores it against each reference label.
pub fn evaluate_cer(
    model: &ToyModel,
    dataset: &[Sample],
    vocab: &GramVocab,
    stride: usize,
) -> Result<CerReport> {
    if model.heads[0].outputs != vocab.total_symbols() {
        return Err(Error::DimensionMismatch {
            expected: vocab.total_symbols(),
            found: model.heads[0].outputs,
        });
    }
    let per_sample = dataset
        .iter()
        .map(|s| {
            let feats = apply_stride(&s.features, stride);
            let logits = LogitsMatrix::new(model.try_logits(0, &feats)?)?;
            let hyp = greedy_decode(&log_softmax(&logits), vocab).label;
            Ok(SampleEdits {
                reference: s.label.to_string(),
                hypothesis: hyp.to_string(),
                edits: levenshtein(s.label.units(), hyp.units()),
                reference_len: s.label.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rate = |e: &SampleEdits| {
        if e.reference_len == 0 {
            if e.edits == 0 {
                0.0
            } else {
                1.0
            }
        } else {
            e.edits as f64 / e.reference_len as f64
        }
    };
    let cer = if per_sample.is_empty() {
        0.0
    } else {
        per_sample.iter().map(rate).sum::<f64>() / per_sample.len() as f64
    };
    Ok(CerReport { cer, per_sample })
}
