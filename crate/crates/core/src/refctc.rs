//! Classic unit-level CTC over the `2|l| + 1` blank-interleaved topology.
//!
//! Written independently of [`crate::loss`]: its own normalization and
//! accumulation helpers, its own state indexing, and a backward variable that
//! excludes the current frame's emission. It serves as the reference the gram
//! kernel must agree with when every gram is a single unit.

use crate::error::{Error, Result};
use crate::loss::{LogitsMatrix, LossGrad};
use crate::matrix::Matrix;
use crate::vocab::Label;

const NEG_INF: f64 = f64::NEG_INFINITY;

fn lse2(a: f64, b: f64) -> f64 {
    if a == NEG_INF {
        b
    } else if b == NEG_INF {
        a
    } else if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

fn lse3(a: f64, b: f64, c: f64) -> f64 {
    lse2(lse2(a, b), c)
}

fn normalize_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for t in 0..out.rows() {
        let row = out.row_mut(t);
        let m = row.iter().cloned().fold(NEG_INF, f64::max);
        let z = m + row.iter().map(|u| (u - m).exp()).sum::<f64>().ln();
        row.iter_mut().for_each(|u| *u -= z);
    }
    out
}

/// CTC negative log-likelihood and gradient. Column 0 is the blank and
/// column `i + 1` is `base_units[i]`.
pub fn ctc_loss_grad(
    logits: &LogitsMatrix,
    label: &Label,
    base_units: &[char],
) -> Result<LossGrad> {
    let symbols = base_units.len() + 1;
    if logits.symbols() != symbols {
        return Err(Error::DimensionMismatch {
            expected: symbols,
            found: logits.symbols(),
        });
    }
    let mut target = Vec::with_capacity(label.len());
    for (pos, c) in label.units().iter().enumerate() {
        let col = base_units
            .iter()
            .position(|u| u == c)
            .ok_or(Error::UnknownUnit {
                unit: *c,
                position: pos + 1,
            })?;
        target.push(col + 1);
    }

    let frames = logits.frames();
    let logp = normalize_rows(logits.values());

    // extended sequence: blank, l1, blank, l2, ..., blank
    let ext: Vec<usize> = std::iter::once(0)
        .chain(target.iter().flat_map(|&k| [k, 0]))
        .collect();
    let n = ext.len();

    let repeats = target.windows(2).filter(|w| w[0] == w[1]).count();
    let required = target.len() + repeats;
    if frames < required {
        return Err(Error::ImpossibleAlignment { frames, required });
    }
    if frames == 0 {
        return Ok(LossGrad {
            loss: 0.0,
            grad: Matrix::zeros(0, symbols),
        });
    }

    let skip_allowed = |s: usize| s >= 2 && ext[s] != 0 && ext[s] != ext[s - 2];

    let mut alpha = vec![vec![NEG_INF; n]; frames];
    alpha[0][0] = logp.get(0, ext[0]);
    if n > 1 {
        alpha[0][1] = logp.get(0, ext[1]);
    }
    for t in 1..frames {
        for s in 0..n {
            let stay = alpha[t - 1][s];
            let step = if s >= 1 { alpha[t - 1][s - 1] } else { NEG_INF };
            let skip = if skip_allowed(s) {
                alpha[t - 1][s - 2]
            } else {
                NEG_INF
            };
            let acc = lse3(stay, step, skip);
            alpha[t][s] = if acc == NEG_INF {
                NEG_INF
            } else {
                acc + logp.get(t, ext[s])
            };
        }
    }

    let last = frames - 1;
    let log_p = if n > 1 {
        lse2(alpha[last][n - 1], alpha[last][n - 2])
    } else {
        alpha[last][0]
    };
    if log_p == NEG_INF {
        return Err(Error::ImpossibleAlignment { frames, required });
    }

    // beta[t][s]: log probability of frames t+1.. given state s at frame t
    let mut beta = vec![vec![NEG_INF; n]; frames];
    beta[last][n - 1] = 0.0;
    if n > 1 {
        beta[last][n - 2] = 0.0;
    }
    for t in (0..last).rev() {
        for s in 0..n {
            let stay = beta[t + 1][s] + logp.get(t + 1, ext[s]);
            let step = if s + 1 < n {
                beta[t + 1][s + 1] + logp.get(t + 1, ext[s + 1])
            } else {
                NEG_INF
            };
            let skip = if s + 2 < n && skip_allowed(s + 2) {
                beta[t + 1][s + 2] + logp.get(t + 1, ext[s + 2])
            } else {
                NEG_INF
            };
            beta[t][s] = lse3(stay, step, skip);
        }
    }

    let mut grad = Matrix::zeros(frames, symbols);
    for t in 0..frames {
        let mut occ = vec![NEG_INF; symbols];
        for s in 0..n {
            occ[ext[s]] = lse2(occ[ext[s]], alpha[t][s] + beta[t][s]);
        }
        for (k, &o) in occ.iter().enumerate() {
            let y = logp.get(t, k).exp();
            grad.set(t, k, y - (o - log_p).exp());
        }
    }

    Ok(LossGrad { loss: -log_p, grad })
}
