use ndarray::{Array, Array1, ArrayView1, Dimension};

use crate::error::{Error, Result};

/// Inner-product relevance score.
pub fn score(user: ArrayView1<f64>, item: ArrayView1<f64>) -> Result<f64> {
    if user.len() != item.len() {
        return Err(Error::Shape(format!("score of {}-vector with {}-vector", user.len(), item.len())));
    }
    Ok(user.dot(&item))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on a logit: returns `(loss, dloss/dlogit)`.
pub fn rec_loss(logit: f64, target: f64) -> (f64, f64) {
    let loss = logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p();
    (loss, sigmoid(logit) - target)
}

/// Softmax cross-entropy: returns `(loss, dloss/dlogits)`.
pub fn cls_loss(logits: ArrayView1<f64>, category: usize) -> Result<(f64, Array1<f64>)> {
    if category >= logits.len() {
        return Err(Error::OutOfRange {
            what: "category",
            index: category,
            len: logits.len(),
        });
    }
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exp = logits.mapv(|z| (z - max).exp());
    let sum = exp.sum();
    let loss = -logits[category] + max + sum.ln();
    let mut grad = exp / sum;
    grad[category] -= 1.0;
    Ok((loss, grad))
}

/// Gradient reversal: identity forward, `-gamma * upstream` backward.
pub fn grl_backward<D: Dimension>(upstream: &Array<f64, D>, gamma: f64) -> Array<f64, D> {
    let scale = -gamma;
    upstream.mapv(|g| scale * g)
}
