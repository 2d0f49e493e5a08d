//! Seeded self-checks over random small instances: DP against brute force,
//! normalization over all labels, and analytic against numeric gradients.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::loss::{gram_ctc_loss_grad, likelihood, log_softmax, LogitsMatrix};
use crate::matrix::Matrix;
use crate::oracle::{brute_force_label_distribution, brute_force_likelihood, DEFAULT_PATH_CAP};
use crate::vocab::{GramVocab, Label};

const UNITS: [char; 5] = ['a', 'b', 'c', 'd', 'e'];

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceShape {
    /// Upper bound on `|G'|`, blank included.
    pub max_symbols: usize,
    pub max_gram_len: usize,
    pub max_frames: usize,
    pub max_label_len: usize,
    /// Draw the frame count from the feasible range only.
    pub feasible: bool,
}

impl InstanceShape {
    pub fn tiny(max_frames: usize) -> Self {
        InstanceShape {
            max_symbols: 4,
            max_gram_len: 2,
            max_frames,
            max_label_len: 3,
            feasible: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub vocab: GramVocab,
    pub label: Label,
    pub logits: LogitsMatrix,
}

/// A random vocab (base units plus some multi-unit grams), a label over its
/// base units, and Gaussian logits.
pub fn random_instance<R: Rng>(rng: &mut R, shape: &InstanceShape) -> Result<Instance> {
    if shape.max_symbols < 2 || shape.max_frames == 0 {
        return Err(Error::InvalidConfig(
            "need at least 2 symbols and 1 frame".into(),
        ));
    }
    let max_units = (shape.max_symbols - 1).min(UNITS.len());
    let n_units = rng.random_range(1..=max_units);
    let base = &UNITS[..n_units];

    let mut candidates: Vec<String> = Vec::new();
    for len in 2..=shape.max_gram_len {
        let mut idx = vec![0usize; len];
        loop {
            candidates.push(idx.iter().map(|&i| base[i]).collect());
            let mut k = len;
            while k > 0 {
                k -= 1;
                idx[k] += 1;
                if idx[k] < n_units {
                    break;
                }
                idx[k] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    candidates.shuffle(rng);
    let room = shape.max_symbols - 1 - n_units;
    let extra = rng.random_range(0..=room.min(candidates.len()));
    let mut grams: Vec<String> = base.iter().map(|c| c.to_string()).collect();
    grams.extend(candidates.into_iter().take(extra));
    let vocab = GramVocab::build(&grams, base)?;

    let label_len = rng.random_range(0..=shape.max_label_len);
    let label = Label::from_units(
        (0..label_len)
            .map(|_| base[rng.random_range(0..n_units)])
            .collect(),
    );

    let min_frames = if shape.feasible {
        Lattice::build(&vocab, &label).min_path_length().max(1)
    } else {
        1
    };
    let frames = rng.random_range(min_frames..=shape.max_frames.max(min_frames));
    let normal = Normal::new(0.0, 1.5).expect("valid normal");
    let values: Vec<f64> = (0..frames * vocab.total_symbols())
        .map(|_| normal.sample(rng))
        .collect();
    let logits = LogitsMatrix::new(Matrix::from_vec(frames, vocab.total_symbols(), values)?)?;
    Ok(Instance {
        vocab,
        label,
        logits,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckReport {
    fn new(check: &str, instances: usize, max_error: f64, tolerance: f64) -> Self {
        CheckReport {
            check: check.to_string(),
            instances,
            max_error,
            tolerance,
            passed: max_error <= tolerance,
        }
    }

    /// `"PASS, max rel err ≤ 1e-9"` style one-liner.
    pub fn summary(&self) -> String {
        let kind = if self.check == "normalize" {
            "abs err"
        } else {
            "rel err"
        };
        if self.passed {
            format!("PASS, max {kind} ≤ {:e}", self.tolerance)
        } else {
            format!(
                "FAIL, max {kind} {:e} > {:e}",
                self.max_error, self.tolerance
            )
        }
    }
}

fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// DP likelihood against brute-force path enumeration, plus the per-frame
/// consistency of `log Z_t` on feasible instances.
pub fn oracle_check(
    seed: u64,
    instances: usize,
    shape: &InstanceShape,
    tolerance: f64,
) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let inst = random_instance(&mut rng, shape)?;
        let post = log_softmax(&inst.logits);
        let fb = likelihood(&Lattice::build(&inst.vocab, &inst.label), &post)?;
        let dp = fb.log_likelihood.exp();
        let bf = brute_force_likelihood(&post, &inst.label, &inst.vocab, DEFAULT_PATH_CAP)?;
        worst = worst.max(if bf == 0.0 { dp } else { (dp - bf).abs() / bf });
        if fb.is_feasible() {
            worst = worst.max(fb.max_consistency_error());
        }
    }
    Ok(CheckReport::new("oracle", instances, worst, tolerance))
}

/// Sums the DP likelihood over every label the paths can produce.
pub fn normalize_check(
    seed: u64,
    instances: usize,
    shape: &InstanceShape,
    tolerance: f64,
) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let inst = random_instance(&mut rng, shape)?;
        let post = log_softmax(&inst.logits);
        let labels = brute_force_label_distribution(&post, &inst.vocab, DEFAULT_PATH_CAP)?;
        let total: f64 = labels
            .keys()
            .map(|l| {
                likelihood(&Lattice::build(&inst.vocab, l), &post).map(|fb| fb.log_likelihood.exp())
            })
            .sum::<Result<f64>>()?;
        worst = worst.max((total - 1.0).abs());
    }
    Ok(CheckReport::new("normalize", instances, worst, tolerance))
}

/// Central differences of the loss with respect to each logit.
pub fn finite_difference_grad(
    logits: &LogitsMatrix,
    label: &Label,
    vocab: &GramVocab,
    h: f64,
) -> Result<Matrix> {
    let base = logits.values();
    let mut out = Matrix::zeros(base.rows(), base.cols());
    for t in 0..base.rows() {
        for k in 0..base.cols() {
            let probe = |delta: f64| {
                let mut m = base.clone();
                m.set(t, k, base.get(t, k) + delta);
                gram_ctc_loss_grad(&LogitsMatrix::new(m)?, label, vocab).map(|lg| lg.loss)
            };
            out.set(t, k, (probe(h)? - probe(-h)?) / (2.0 * h));
        }
    }
    Ok(out)
}

/// Analytic gradient against central differences on feasible instances.
pub fn grad_check(
    seed: u64,
    instances: usize,
    shape: &InstanceShape,
    h: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    let shape = InstanceShape {
        feasible: true,
        ..shape.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let inst = random_instance(&mut rng, &shape)?;
        let analytic = gram_ctc_loss_grad(&inst.logits, &inst.label, &inst.vocab)?.grad;
        let numeric = finite_difference_grad(&inst.logits, &inst.label, &inst.vocab, h)?;
        for (a, n) in analytic.as_slice().iter().zip(numeric.as_slice()) {
            worst = worst.max(rel_err(*a, *n, 1e-6));
        }
    }
    Ok(CheckReport::new("grad", instances, worst, tolerance))
}
