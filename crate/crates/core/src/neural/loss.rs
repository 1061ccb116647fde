//! Training objectives on plain vectors.

use super::graph::{bce_grad, bce_value, softmax};
use crate::error::{Error, Result};

/// Returns `-log softmax(logits)[target]` and its gradient `softmax - onehot`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::Range(format!(
            "target {target} with {} classes",
            logits.len()
        )));
    }
    let probs = softmax(logits);
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    let loss = lse - logits[target];
    let grad = probs
        .iter()
        .enumerate()
        .map(|(i, p)| p - if i == target { 1.0 } else { 0.0 })
        .collect();
    Ok((loss, grad))
}

/// Mean binary cross-entropy over K outputs (probabilities clamped at 1e-7)
/// and its gradient with respect to the probabilities.
pub fn binary_cross_entropy(probs: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if probs.len() != targets.len() || probs.is_empty() {
        return Err(Error::shape(format!(
            "bce: {} probabilities, {} targets",
            probs.len(),
            targets.len()
        )));
    }
    Ok((bce_value(probs, targets), bce_grad(probs, targets)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_k() {
        let (loss, grad) = softmax_cross_entropy(&[0.0; 4], 2).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((loss - 1.386294).abs() < 1e-6);
        assert!(grad.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn peaked_logits_give_small_loss() {
        let (loss, _) = softmax_cross_entropy(&[50.0, 0.0, -3.0], 0).unwrap();
        assert!(loss < 1e-20);
    }

    #[test]
    fn cross_entropy_gradient_sums_to_zero() {
        let (_, grad) = softmax_cross_entropy(&[3.1, -0.2, 7.5, 1e-3, -12.0], 4).unwrap();
        assert!(grad.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn target_out_of_range() {
        assert!(softmax_cross_entropy(&[0.0, 1.0], 2).is_err());
    }

    #[test]
    fn bce_examples() {
        let (l, _) = binary_cross_entropy(&[0.5; 3], &[1.0, 0.0, 1.0]).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12);
        let (l, _) = binary_cross_entropy(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(l < 1e-6);
        let (l, g) = binary_cross_entropy(&[0.8], &[1.0]).unwrap();
        assert!((l + 0.8f64.ln()).abs() < 1e-12);
        assert!((l - 0.223144).abs() < 1e-6);
        assert!((g[0] + 1.0 / 0.8).abs() < 1e-12);
        assert!(binary_cross_entropy(&[0.5], &[1.0, 0.0]).is_err());
    }
}
