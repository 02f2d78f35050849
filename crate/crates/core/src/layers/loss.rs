use crate::catalog::ClassId;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Mean softmax cross-entropy over a `[N, K]` batch of logits.
///
/// Returns the loss and `dlogits = (softmax - onehot) / N`. The
/// log-sum-exp subtracts each row's maximum first, so arbitrarily large
/// logits do not overflow.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[ClassId]) -> Result<(T, Tensor<T>)> {
    let [n, k] = logits.shape()[..] else {
        return Err(Error::shape(format!("logits must be [N, K], got {:?}", logits.shape())));
    };
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for {n} logit rows", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|l| l.get() > k) {
        return Err(Error::input(format!("label {bad} outside 1..={k}")));
    }

    let inv_n = T::one() / T::from_f64(n as f64);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(n * k);
    for (row, label) in logits.data().chunks_exact(k).zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum_exp: T = row.iter().map(|&z| (z - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        loss = loss + (log_z - row[label.index()]);
        for (c, &z) in row.iter().enumerate() {
            let p = (z - log_z).exp();
            let onehot = if c == label.index() { T::one() } else { T::zero() };
            grad.push((p - onehot) * inv_n);
        }
    }
    Ok((loss * inv_n, Tensor::from_vec(&[n, k], grad)?))
}

/// Row-wise argmax; ties resolve to the lowest class id.
pub fn argmax_rows<T: Scalar>(scores: &Tensor<T>) -> Result<Vec<ClassId>> {
    let [_, k] = scores.shape()[..] else {
        return Err(Error::shape(format!("scores must be [N, K], got {:?}", scores.shape())));
    };
    Ok(scores
        .data()
        .chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            ClassId::from_index(best)
        })
        .collect())
}
