use crate::error::{Error, Result};

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against `target`, with its gradient
/// `softmax - one_hot(target)`.
pub fn softmax_xent(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::shape(format!("target class {target} outside {} logits", logits.len())));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[target];
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_cost_ln_c() {
        for c in 2..10 {
            let (loss, _) = softmax_xent(&vec![0.3; c], c - 1).unwrap();
            assert!((loss - (c as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_target() {
        let (loss, grad) = softmax_xent(&[0.0, 1000.0, -3.0], 1).unwrap();
        assert!(loss.abs() < 1e-6);
        assert!(grad.iter().all(|g| g.abs() < 1e-6));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let logits = [0.3, -1.2, 2.2, 0.05, -0.7];
        let (_, grad) = softmax_xent(&logits, 2).unwrap();
        let h = 1e-6;
        for i in 0..5 {
            let mut up = logits;
            let mut dn = logits;
            up[i] += h;
            dn[i] -= h;
            let num = (softmax_xent(&up, 2).unwrap().0 - softmax_xent(&dn, 2).unwrap().0) / (2.0 * h);
            assert!((num - grad[i]).abs() <= 1e-7, "{i}: {num} vs {}", grad[i]);
        }
    }

    #[test]
    fn out_of_range_target() {
        assert!(softmax_xent(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.0, 2.0, 1.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0; 4]), 0);
    }
}
