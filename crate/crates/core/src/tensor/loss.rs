use super::{Matrix, Real};
use crate::error::{Error, Result};

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Row-wise log-probabilities, evaluated in 64-bit.
pub fn log_softmax_rows<T: Real>(logits: &Matrix<T>) -> Matrix<f64> {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let row: Vec<f64> = logits.row(r).iter().map(|v| v.as_f64()).collect();
        let lse = log_sum_exp(&row);
        for (o, v) in out.row_mut(r).iter_mut().zip(&row) {
            *o = v - lse;
        }
    }
    out
}

/// Mean negative log-likelihood over positions and its logit gradient
/// `(softmax − one_hot) / n`.
pub fn softmax_xent<T: Real>(logits: &Matrix<T>, targets: &[usize], class_count: usize) -> Result<(f64, Matrix<T>)> {
    let n = logits.rows();
    if n == 0 {
        return Err(Error::Contract("softmax_xent needs at least one position".into()));
    }
    if logits.cols() != class_count {
        return Err(Error::Contract(format!(
            "logits have {} classes, expected {class_count}",
            logits.cols()
        )));
    }
    if targets.len() != n {
        return Err(Error::Contract(format!("{} targets for {n} positions", targets.len())));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= class_count) {
        return Err(Error::Contract(format!(
            "target {bad} out of range for {class_count} classes"
        )));
    }
    let log_probs = log_softmax_rows(logits);
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(n, class_count);
    for (r, &target) in targets.iter().enumerate() {
        let lp = log_probs.row(r);
        loss -= lp[target];
        for (k, g) in grad.row_mut(r).iter_mut().enumerate() {
            let one_hot = if k == target { 1.0 } else { 0.0 };
            *g = T::from_f64((lp[k].exp() - one_hot) * inv_n);
        }
    }
    Ok((loss * inv_n, grad))
}
