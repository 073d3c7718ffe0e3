use alloc::vec::Vec;

use super::{exp, ln};
use crate::{Error, Result};

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + ln(logits.iter().map(|&v| exp(v - m)).sum::<f64>())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&v| exp(v - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of `softmax(logits)` against `target`, with its gradient
/// `softmax(logits) − onehot(target)`.
pub fn softmax_xent(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::Index { index: target, len: logits.len() });
    }
    let loss = log_sum_exp(logits) - logits[target];
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits_give_ln_n() {
        for t in 0..4 {
            let (loss, _) = softmax_xent(&[0.3; 4], t).unwrap();
            assert!((loss - 1.386294).abs() < 1e-6);
        }
    }

    #[test]
    fn saturated_correct_is_near_zero() {
        let (loss, _) = softmax_xent(&[30.0, -30.0], 0).unwrap();
        assert!(loss < 1e-20);
    }

    #[test]
    fn target_out_of_range() {
        assert!(matches!(softmax_xent(&[0.0, 1.0], 2), Err(Error::Index { .. })));
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(logits in prop::collection::vec(-700.0f64..700.0, 1..12)) {
            let s: f64 = softmax(&logits).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn xent_grad_sums_to_zero(logits in prop::collection::vec(-50.0f64..50.0, 2..10), t in 0usize..2) {
            let (_, g) = softmax_xent(&logits, t).unwrap();
            prop_assert!(g.iter().sum::<f64>().abs() < 1e-12);
        }
    }
}
