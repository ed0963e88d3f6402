//! Softmax and sparse categorical cross-entropy.

use super::{Scalar, Tensor};
use crate::{Error, Result};

/// Row-wise softmax of a (B, K) logit matrix, max-shifted for stability.
pub fn softmax_rows<F: Scalar>(logits: &Tensor<F>) -> Tensor<F> {
    let k = *logits.shape.last().unwrap();
    let mut out = logits.clone();
    for row in out.data.chunks_mut(k) {
        let mx = row.iter().fold(F::neg_infinity(), |a, &b| a.max(b));
        let mut sum = F::zero();
        for v in row.iter_mut() {
            *v = (*v - mx).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean of -log p(label) computed in fused log-softmax form from logits.
pub fn sparse_ce_from_logits<F: Scalar>(logits: &Tensor<F>, labels: &[usize]) -> Result<f64> {
    let k = *logits.shape.last().unwrap();
    let b = logits.batch();
    if labels.len() != b {
        return Err(Error::LengthMismatch { left: b, right: labels.len() });
    }
    let mut total = 0.0;
    for (row, &label) in logits.data.chunks(k).zip(labels) {
        if label >= k {
            return Err(Error::LabelOutOfRange { label, classes: k });
        }
        let mx = row.iter().fold(F::neg_infinity(), |a, &b| a.max(b)).to_f64();
        let lse = row.iter().map(|&v| (v.to_f64() - mx).exp()).sum::<f64>().ln() + mx;
        total += lse - row[label].to_f64();
    }
    Ok(total / b as f64)
}

/// Mean of -log(probs[label]) over a batch of probability rows.
pub fn loss_sparse_ce<F: Scalar>(probs: &Tensor<F>, labels: &[usize]) -> Result<f64> {
    let k = *probs.shape.last().unwrap();
    let b = probs.batch();
    if labels.len() != b {
        return Err(Error::LengthMismatch { left: b, right: labels.len() });
    }
    let mut total = 0.0;
    for (row, &label) in probs.data.chunks(k).zip(labels) {
        if label >= k {
            return Err(Error::LabelOutOfRange { label, classes: k });
        }
        total += -(row[label].to_f64().max(f64::MIN_POSITIVE)).ln();
    }
    Ok(total / b as f64)
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy<F: Scalar>(probs: &Tensor<F>, labels: &[usize]) -> f64 {
    let k = *probs.shape.last().unwrap();
    let correct = probs
        .data
        .chunks(k)
        .zip(labels)
        .filter(|(row, &label)| {
            let argmax = (0..k).max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap()).unwrap();
            argmax == label
        })
        .count();
    correct as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = Tensor::from_vec(&[2, 10], (0..20).map(|i| i as f64 * 0.37 - 3.0).collect());
        let p = softmax_rows(&logits);
        for row in p.data.chunks(10) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn perfect_prediction_zero_loss() {
        let mut probs = Tensor::zeros(&[1, 10]);
        probs.data[3] = 1.0;
        assert_eq!(loss_sparse_ce(&probs, &[3]).unwrap(), 0.0);
    }

    #[test]
    fn uniform_loss_is_ln_k() {
        let probs = Tensor::from_vec(&[1, 10], vec![0.1f64; 10]);
        let loss = loss_sparse_ce(&probs, &[4]).unwrap();
        assert!((loss - (10.0f64).ln()).abs() < 1e-12);
        assert!((loss - 2.302585).abs() < 1e-6);
    }

    #[test]
    fn lower_true_class_probability_raises_loss() {
        let mut prev = 0.0;
        for p in [0.9, 0.5, 0.2, 0.05] {
            let rest = (1.0 - p) / 9.0;
            let mut probs = Tensor::from_vec(&[1, 10], vec![rest; 10]);
            probs.data[0] = p;
            let loss = loss_sparse_ce(&probs, &[0]).unwrap();
            assert!(loss > prev);
            prev = loss;
        }
    }

    #[test]
    fn fused_form_stable_for_large_logits() {
        let logits = Tensor::from_vec(&[1, 4], vec![50.0f64, -50.0, 49.0, 0.0]);
        let loss = sparse_ce_from_logits(&logits, &[1]).unwrap();
        assert!(loss.is_finite());
        let probs = softmax_rows(&logits);
        let direct = loss_sparse_ce(&probs, &[1]).unwrap();
        assert!((loss - direct).abs() / loss < 1e-6);
    }

    #[test]
    fn label_out_of_range_errors() {
        let probs = Tensor::from_vec(&[1, 3], vec![0.2f64, 0.3, 0.5]);
        assert!(matches!(
            loss_sparse_ce(&probs, &[7]),
            Err(Error::LabelOutOfRange { .. })
        ));
    }
}
