use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Linear output layer: `params` holds the `inputs x outputs` weights
/// row-major, followed by `outputs` biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub inputs: usize,
    pub outputs: usize,
    pub params: Vec<f64>,
}

impl LinearHead {
    pub fn bias(&self) -> &[f64] {
        &self.params[self.inputs * self.outputs..]
    }
}

/// Context-window linear model. Frame `t` sees frames `t - h ..= t + h`
/// (zero outside the sequence), where `window = 2h + 1`; each head maps the
/// concatenated window to one logit per output symbol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub window: usize,
    pub input_dim: usize,
    pub heads: Vec<LinearHead>,
}

impl ToyModel {
    /// Small Gaussian weights, zero biases, one head per entry of `outputs`.
    pub fn new(window: usize, input_dim: usize, outputs: &[usize], seed: u64) -> Result<Self> {
        if window.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("window {window} must be odd")));
        }
        if outputs.is_empty() || outputs.contains(&0) || input_dim == 0 {
            return Err(Error::InvalidConfig(
                "model needs inputs and non-empty heads".into(),
            ));
        }
        let inputs = window * input_dim;
        let init = Normal::new(0.0, 0.01).expect("valid normal");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heads = outputs
            .iter()
            .map(|&out| {
                let mut params: Vec<f64> =
                    (0..inputs * out).map(|_| init.sample(&mut rng)).collect();
                params.extend(std::iter::repeat_n(0.0, out));
                LinearHead {
                    inputs,
                    outputs: out,
                    params,
                }
            })
            .collect();
        Ok(ToyModel {
            window,
            input_dim,
            heads,
        })
    }

    fn half(&self) -> usize {
        self.window / 2
    }

    fn check_input(&self, features: &Matrix) -> Result<()> {
        if features.rows() > 0 && features.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: features.cols(),
            });
        }
        Ok(())
    }

    /// Calls `f(i, x)` for every non-zero input coordinate of frame `t`.
    #[inline]
    fn for_each_input(&self, features: &Matrix, t: usize, mut f: impl FnMut(usize, f64)) {
        let h = self.half() as isize;
        for w in 0..self.window {
            let src = t as isize + w as isize - h;
            if src < 0 || src >= features.rows() as isize {
                continue;
            }
            let row = features.row(src as usize);
            let base = w * self.input_dim;
            for (d, &x) in row.iter().enumerate() {
                f(base + d, x);
            }
        }
    }

    /// Logits of `head` for every frame, `T x outputs`.
    pub fn logits(&self, head: usize, features: &Matrix) -> Matrix {
        let hd = &self.heads[head];
        let mut out = Matrix::zeros(features.rows(), hd.outputs);
        for t in 0..features.rows() {
            let row = out.row_mut(t);
            row.copy_from_slice(hd.bias());
            self.for_each_input(features, t, |i, x| {
                let w = &hd.params[i * hd.outputs..(i + 1) * hd.outputs];
                for (o, wk) in row.iter_mut().zip(w) {
                    *o += x * wk;
                }
            });
        }
        out
    }

    pub fn try_logits(&self, head: usize, features: &Matrix) -> Result<Matrix> {
        self.check_input(features)?;
        if head >= self.heads.len() {
            return Err(Error::InvalidConfig(format!("no head {head}")));
        }
        Ok(self.logits(head, features))
    }

    /// Chains `dlogits` (`T x outputs`) through the head into `grad`
    /// (laid out like the head's `params`).
    pub fn backprop(&self, head: usize, features: &Matrix, dlogits: &Matrix, grad: &mut [f64]) {
        let hd = &self.heads[head];
        let outputs = hd.outputs;
        let bias_off = hd.inputs * outputs;
        for t in 0..features.rows() {
            let g = dlogits.row(t);
            self.for_each_input(features, t, |i, x| {
                let slot = &mut grad[i * outputs..(i + 1) * outputs];
                for (s, gk) in slot.iter_mut().zip(g) {
                    *s += x * gk;
                }
            });
            for (s, gk) in grad[bias_off..].iter_mut().zip(g) {
                *s += gk;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.heads.iter().map(|h| h.params.len()).sum()
    }
}
