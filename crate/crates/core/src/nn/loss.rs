use super::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::label::NUM_CLASSES;

/// Row-wise softmax of `(N, C)` logits, max-subtracted.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Vec<Vec<f64>>> {
    let (_, c) = logits.dims2("softmax")?;
    Ok(logits
        .data()
        .chunks(c)
        .map(|row| {
            let m = row.iter().map(|v| v.f64()).fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v.f64() - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect())
}

/// Mean cross-entropy over the batch and its gradient `(softmax - onehot) / N`.
pub fn cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>)> {
    let (n, c) = logits.dims2("cross_entropy")?;
    if c != NUM_CLASSES || labels.len() != n {
        return Err(Error::shape("cross_entropy", [labels.len(), NUM_CLASSES], logits.shape()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Domain(format!("label {bad} outside 0..{c}")));
    }
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(logits.shape());
    for (i, (row, &label)) in logits.data().chunks(c).zip(labels).enumerate() {
        let m = row.iter().map(|v| v.f64()).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v.f64() - m).exp()).sum();
        let log_z = m + sum.ln();
        loss += log_z - row[label].f64();
        for (j, v) in row.iter().enumerate() {
            let p = (v.f64() - log_z).exp();
            let target = if j == label { 1.0 } else { 0.0 };
            grad.data_mut()[i * c + j] = T::of((p - target) / n as f64);
        }
    }
    let loss = loss / n as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("cross entropy is {loss}")));
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln4() {
        let logits = Tensor::<f64>::zeros(&[3, 4]);
        let (loss, grad) = cross_entropy(&logits, &[0, 1, 3]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((grad.data()[0] - (0.25 - 1.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn large_margin_drives_loss_to_zero() {
        let logits = Tensor::<f32>::from_vec(&[1, 4], vec![1000.0, 0.0, 0.0, -5.0]).unwrap();
        let (loss, _) = cross_entropy(&logits, &[0]).unwrap();
        assert!(loss < 1e-12);
    }

    #[test]
    fn bad_labels_rejected() {
        let logits = Tensor::<f32>::zeros(&[1, 4]);
        assert!(matches!(cross_entropy(&logits, &[4]), Err(Error::Domain(_))));
        assert!(cross_entropy(&logits, &[0, 1]).is_err());
    }
}
