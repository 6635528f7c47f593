use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::real::Real;

/// Mean softmax cross-entropy over the batch and its gradient
/// `(softmax - onehot) / batch`. Reductions run in `f64`.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor<T>, labels: &[u8]) -> Result<(f64, Tensor<T>)> {
    let b = logits.batch();
    if logits.shape().len() != 2 || labels.len() != b {
        return Err(Error::shape(&[labels.len(), 0], logits.shape()));
    }
    let classes = logits.shape()[1];
    let mut grad = Vec::with_capacity(b * classes);
    let mut total = 0.0f64;
    let mut probs = vec![0.0f64; classes];
    for (i, &label) in labels.iter().enumerate() {
        let label = label as usize;
        if label >= classes {
            return Err(Error::InvalidInput(format!(
                "label {label} outside 0..{classes}"
            )));
        }
        let row = logits.row(i);
        let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (p, v) in probs.iter_mut().zip(row) {
            *p = (v.as_f64() - max).exp();
            sum += *p;
        }
        total += sum.ln() - (row[label].as_f64() - max);
        for (j, p) in probs.iter().enumerate() {
            let onehot = if j == label { 1.0 } else { 0.0 };
            grad.push(T::of((p / sum - onehot) / b as f64));
        }
    }
    if !total.is_finite() {
        return Err(Error::Numeric("cross-entropy is not finite".into()));
    }
    let loss = if b == 0 { 0.0 } else { total / b as f64 };
    Ok((loss, Tensor::new(logits.shape(), grad)?))
}
