use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::real::Real;

/// Tolerance on label rows summing to one.
pub const LABEL_SUM_TOL: f64 = 1e-6;

/// Loss and `∂loss/∂logits` of `-Σ target · log softmax(logits)`.
pub fn softmax_cross_entropy<T: Real>(logits: ArrayView1<T>, target: ArrayView1<T>) -> (T, Array1<T>) {
    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let shifted = logits.mapv(|v| v - max);
    let log_z = shifted.mapv(T::exp).sum().ln();
    let log_p = shifted.mapv(|v| v - log_z);
    let loss = -target.iter().zip(log_p.iter()).map(|(&t, &lp)| t * lp).sum::<T>();
    let tsum = target.sum();
    let grad = ndarray::Zip::from(&log_p).and(target).map_collect(|&lp, &t| lp.exp() * tsum - t);
    (loss, grad)
}

fn check_labels<T: Real>(labels: ArrayView2<T>) -> Result<()> {
    for (i, row) in labels.rows().into_iter().enumerate() {
        let s = row.sum().f64();
        if (s - 1.0).abs() > LABEL_SUM_TOL {
            return Err(Error::input(format!("label row {i} sums to {s}, expected 1")));
        }
    }
    Ok(())
}

/// Mean over the batch of the soft-label cross entropy. `logits` and
/// `labels` are `[B, K]`.
pub fn cross_entropy_loss<T: Real>(logits: ArrayView2<T>, labels: ArrayView2<T>) -> Result<T> {
    if logits.dim() != labels.dim() {
        return Err(Error::input("logits and labels differ in shape"));
    }
    check_labels(labels)?;
    let b = logits.nrows();
    if b == 0 {
        return Ok(T::zero());
    }
    let total = logits
        .rows()
        .into_iter()
        .zip(labels.rows())
        .map(|(l, t)| softmax_cross_entropy(l, t).0)
        .sum::<T>();
    Ok(total / T::of(b as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2, Array2};

    #[test]
    fn uniform_logits_give_log_k() {
        let logits = Array2::<f64>::zeros((3, 10));
        let mut labels = Array2::<f64>::zeros((3, 10));
        for i in 0..3 {
            labels[[i, i]] = 1.0;
        }
        let l = cross_entropy_loss(logits.view(), labels.view()).unwrap();
        assert!((l - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_is_below_ln2() {
        let l = cross_entropy_loss(arr2(&[[3.0, 0.0]]).view(), arr2(&[[1.0, 0.0]]).view()).unwrap();
        assert!(l < 2f64.ln());
    }

    #[test]
    fn soft_label_symmetric() {
        let l = cross_entropy_loss(arr2(&[[0.7, 0.7]]).view(), arr2(&[[0.5, 0.5]]).view()).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_labels_rejected() {
        let r = cross_entropy_loss(arr2(&[[0.0, 0.0]]).view(), arr2(&[[0.5, 0.6]]).view());
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn gradient_is_softmax_minus_target() {
        let (_, g) = softmax_cross_entropy(arr1(&[1.0, 2.0, 0.5]).view(), arr1(&[0.0, 1.0, 0.0]).view());
        let z: f64 = [1.0f64, 2.0, 0.5].iter().map(|v| v.exp()).sum();
        assert!((g[1] - (2f64.exp() / z - 1.0)).abs() < 1e-12);
        assert!((g.sum()).abs() < 1e-12);
    }
}
