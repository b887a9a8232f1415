use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const PROB_FLOOR: f64 = 1e-12;

fn check_labels(shape: &[usize], labels: &[usize]) -> Result<(usize, usize)> {
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            lhs: shape.to_vec(),
            rhs: vec![labels.len()],
        });
    }
    let k = shape[1];
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::invalid(format!("label {bad} out of range for {k} classes")));
    }
    Ok((shape[0], k))
}

/// Mean negative log-likelihood of `labels` under row-wise class
/// probabilities, with probabilities floored before the log.
pub fn cross_entropy(probs: &Tensor, labels: &[usize]) -> Result<f64> {
    let (b, k) = check_labels(probs.shape(), labels)?;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs.data()[i * k + y].max(PROB_FLOOR).ln())
        .sum();
    Ok(total / b as f64)
}

/// Gradient of the per-sample loss with respect to the logits that
/// produced `probs`: `probs - one_hot(labels)`.
pub fn cross_entropy_logit_grad(probs: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let (_, k) = check_labels(probs.shape(), labels)?;
    let mut g = probs.clone();
    for (i, &y) in labels.iter().enumerate() {
        g.data_mut()[i * k + y] -= 1.0;
    }
    Ok(g)
}
