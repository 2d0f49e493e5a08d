use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::LossGrad;

/// One weighted term of a joint objective. The closure produces the term's
/// loss and gradient over its own logits matrix.
pub struct JointTerm<'a> {
    pub eval: Box<dyn FnOnce() -> Result<LossGrad> + 'a>,
    pub weight: f64,
}

impl<'a> JointTerm<'a> {
    pub fn new<F>(weight: f64, eval: F) -> Self
    where
        F: FnOnce() -> Result<LossGrad> + 'a,
    {
        JointTerm {
            eval: Box::new(eval),
            weight,
        }
    }
}

#[derive(Clone, Debug)]
pub struct JointLossGrad {
    /// Weighted sum of the term losses.
    pub loss: f64,
    /// Unweighted per-term losses, in term order.
    pub term_losses: Vec<f64>,
    /// Weighted gradient for each term's logits matrix.
    pub grads: Vec<Matrix>,
}

impl JointLossGrad {
    /// Sum of all term gradients, for terms that share one logits matrix.
    pub fn summed_grad(&self) -> Result<Matrix> {
        let mut iter = self.grads.iter();
        let mut acc = iter
            .next()
            .cloned()
            .ok_or_else(|| Error::InvalidWeights("no terms".into()))?;
        for g in iter {
            acc.add_scaled(g, 1.0)?;
        }
        Ok(acc)
    }
}

/// Weighted sum of several losses.
///
/// Weights must be non-negative with at least one positive, and all terms
/// must cover the same number of frames.
pub fn joint_loss(terms: Vec<JointTerm<'_>>) -> Result<JointLossGrad> {
    if terms.is_empty() {
        return Err(Error::InvalidWeights("no terms".into()));
    }
    if let Some(w) = terms
        .iter()
        .map(|t| t.weight)
        .find(|w| !w.is_finite() || *w < 0.0)
    {
        return Err(Error::InvalidWeights(format!(
            "weight {w} is negative or not finite"
        )));
    }
    if !terms.iter().any(|t| t.weight > 0.0) {
        return Err(Error::InvalidWeights("all weights are zero".into()));
    }

    let mut loss = 0.0;
    let mut term_losses = Vec::with_capacity(terms.len());
    let mut grads = Vec::with_capacity(terms.len());
    let mut frames = None;
    for term in terms {
        let LossGrad { loss: l, mut grad } = (term.eval)()?;
        match frames {
            None => frames = Some(grad.rows()),
            Some(f) if f != grad.rows() => {
                return Err(Error::MismatchedFrames {
                    expected: f,
                    found: grad.rows(),
                })
            }
            Some(_) => {}
        }
        if term.weight > 0.0 {
            loss += term.weight * l;
        }
        grad.scale(term.weight);
        term_losses.push(l);
        grads.push(grad);
    }
    Ok(JointLossGrad {
        loss,
        term_losses,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn term(loss: f64, rows: usize) -> LossGrad {
        let mut grad = Matrix::zeros(rows, 2);
        grad.set(0, 0, 0.25);
        grad.set(0, 1, -0.25);
        LossGrad { loss, grad }
    }

    #[test]
    fn unit_weight_is_identity() {
        let a = term(1.5, 2);
        let j = joint_loss(vec![
            JointTerm::new(1.0, || Ok(term(1.5, 2))),
            JointTerm::new(0.0, || Ok(term(7.0, 2))),
        ])
        .unwrap();
        assert_eq!(j.loss, a.loss);
        assert_eq!(j.grads[0], a.grad);
        assert_eq!(j.term_losses, vec![1.5, 7.0]);
    }

    #[test]
    fn halves_of_the_same_term() {
        let a = term(2.0, 3);
        let j = joint_loss(vec![
            JointTerm::new(0.5, || Ok(term(2.0, 3))),
            JointTerm::new(0.5, || Ok(term(2.0, 3))),
        ])
        .unwrap();
        assert!((j.loss - a.loss).abs() < 1e-15);
        assert!(j.summed_grad().unwrap().max_abs_diff(&a.grad) < 1e-15);
    }

    #[test]
    fn rejects_bad_weights_and_frames() {
        assert!(matches!(
            joint_loss(vec![JointTerm::new(-1.0, || Ok(term(1.0, 1)))]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            joint_loss(vec![JointTerm::new(0.0, || Ok(term(1.0, 1)))]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            joint_loss(vec![
                JointTerm::new(1.0, || Ok(term(1.0, 2))),
                JointTerm::new(1.0, || Ok(term(1.0, 3))),
            ]),
            Err(Error::MismatchedFrames {
                expected: 2,
                found: 3
            })
        ));
    }
}
