//! Per-channel batch normalization over the (batch, time) axes.

use super::{LayerGrads, Mode, ParamGrad, Real, Tensor};
use crate::error::{Error, Result};

/// Exponential moving averages used in eval mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Real> RunningStats<T> {
    /// Mean 0, variance 1.
    pub fn identity(channels: usize) -> Self {
        RunningStats {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
        }
    }
}

/// What [`batchnorm_backward`] needs from a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    pub xhat: Tensor<T>,
    pub inv_std: Vec<f64>,
}

const LANES: usize = 8;

/// 64-bit sum with independent partial accumulators.
fn sum_f64<T: Real>(xs: &[T]) -> f64 {
    let mut acc = [0.0f64; LANES];
    let chunks = xs.chunks_exact(LANES);
    let tail: f64 = chunks.remainder().iter().map(|v| v.as_f64()).sum();
    for chunk in chunks {
        for (a, v) in acc.iter_mut().zip(chunk) {
            *a += v.as_f64();
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn sum_sq_dev<T: Real>(xs: &[T], mean: f64) -> f64 {
    let mut acc = [0.0f64; LANES];
    let chunks = xs.chunks_exact(LANES);
    let tail: f64 = chunks.remainder().iter().map(|v| (v.as_f64() - mean).powi(2)).sum();
    for chunk in chunks {
        for (a, v) in acc.iter_mut().zip(chunk) {
            let d = v.as_f64() - mean;
            *a += d * d;
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn dot_f64<T: Real>(xs: &[T], ys: &[T]) -> f64 {
    let mut acc = [0.0f64; LANES];
    let xc = xs.chunks_exact(LANES);
    let yc = ys.chunks_exact(LANES);
    let tail: f64 = xc
        .remainder()
        .iter()
        .zip(yc.remainder())
        .map(|(x, y)| x.as_f64() * y.as_f64())
        .sum();
    for (cx, cy) in xc.zip(yc) {
        for ((a, x), y) in acc.iter_mut().zip(cx).zip(cy) {
            *a += x.as_f64() * y.as_f64();
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Normalizes each channel, then applies `gamma·x̂ + beta`.
///
/// Train mode uses batch statistics and folds them into `running` as
/// `running ← momentum·running + (1 − momentum)·batch` (the variance folded in
/// is the unbiased estimate). Eval mode reads `running` and returns no cache.
#[allow(clippy::too_many_arguments)]
pub fn batchnorm<T: Real>(
    input: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    running: &mut RunningStats<T>,
    mode: Mode,
    momentum: f64,
    epsilon: f64,
) -> Result<(Tensor<T>, Option<BatchNormCache<T>>)> {
    let s = input.shape();
    let ch = s.channels;
    if gamma.len() != ch || beta.len() != ch || running.mean.len() != ch || running.var.len() != ch {
        return Err(Error::Contract(format!(
            "batchnorm parameters must all have {ch} entries"
        )));
    }
    if epsilon <= 0.0 {
        return Err(Error::Contract("batchnorm epsilon must be positive".into()));
    }
    let n = s.batch * s.time;
    let mut out = Tensor::zeros(s);
    match mode {
        Mode::Eval => {
            for c in 0..ch {
                let inv = 1.0 / (running.var[c].as_f64() + epsilon).sqrt();
                let scale = gamma[c].as_f64() * inv;
                let shift = beta[c].as_f64() - running.mean[c].as_f64() * scale;
                for b in 0..s.batch {
                    let start = (b * ch + c) * s.time;
                    let src = &input.data()[start..start + s.time];
                    let dst = &mut out.data_mut()[start..start + s.time];
                    for (d, &x) in dst.iter_mut().zip(src) {
                        *d = T::from_f64(x.as_f64() * scale + shift);
                    }
                }
            }
            out.debug_assert_finite("batchnorm");
            Ok((out, None))
        }
        Mode::Train => {
            if n < 2 {
                return Err(Error::InvalidInput(format!(
                    "train-mode batchnorm needs batch x time >= 2 per channel, got {n}"
                )));
            }
            let mut xhat = Tensor::zeros(s);
            let mut inv_std = vec![0.0; ch];
            for c in 0..ch {
                let sum: f64 = (0..s.batch).map(|b| sum_f64(input.row(b, c))).sum();
                let mean = sum / n as f64;
                let sq: f64 = (0..s.batch).map(|b| sum_sq_dev(input.row(b, c), mean)).sum();
                let var = sq / n as f64;
                let inv = 1.0 / (var + epsilon).sqrt();
                inv_std[c] = inv;
                let (g, bt) = (gamma[c].as_f64(), beta[c].as_f64());
                for b in 0..s.batch {
                    let range = (b * ch + c) * s.time..(b * ch + c + 1) * s.time;
                    let src = &input.data()[range.clone()];
                    let xh_row = &mut xhat.data_mut()[range.clone()];
                    for (xh, &x) in xh_row.iter_mut().zip(src) {
                        *xh = T::from_f64((x.as_f64() - mean) * inv);
                    }
                    let xh_row = &xhat.data()[range.clone()];
                    for (o, &xh) in out.data_mut()[range].iter_mut().zip(xh_row) {
                        *o = T::from_f64(g * xh.as_f64() + bt);
                    }
                }
                let unbiased = sq / (n - 1) as f64;
                running.mean[c] = T::from_f64(momentum * running.mean[c].as_f64() + (1.0 - momentum) * mean);
                running.var[c] = T::from_f64(momentum * running.var[c].as_f64() + (1.0 - momentum) * unbiased);
            }
            out.debug_assert_finite("batchnorm");
            Ok((out, Some(BatchNormCache { xhat, inv_std })))
        }
    }
}

/// Standard batch-norm gradient:
/// `dx = γ·σ⁻¹/N · (N·dy − Σdy − x̂·Σ(dy·x̂))`.
pub fn batchnorm_backward<T: Real>(
    cache: &BatchNormCache<T>,
    gamma: &[T],
    output_grad: &Tensor<T>,
) -> Result<LayerGrads<Tensor<T>, T>> {
    let s = cache.xhat.shape();
    if output_grad.shape() != s {
        return Err(Error::Contract(format!(
            "batchnorm output grad has shape {}, expected {s}",
            output_grad.shape()
        )));
    }
    let ch = s.channels;
    let n = (s.batch * s.time) as f64;
    let mut dgamma = vec![T::zero(); ch];
    let mut dbeta = vec![T::zero(); ch];
    let mut dx = Tensor::zeros(s);
    for c in 0..ch {
        let (mut sum_dy, mut sum_dy_xhat) = (0.0f64, 0.0f64);
        for b in 0..s.batch {
            sum_dy += sum_f64(output_grad.row(b, c));
            sum_dy_xhat += dot_f64(output_grad.row(b, c), cache.xhat.row(b, c));
        }
        dgamma[c] = T::from_f64(sum_dy_xhat);
        dbeta[c] = T::from_f64(sum_dy);
        let k = gamma[c].as_f64() * cache.inv_std[c] / n;
        for b in 0..s.batch {
            let range = (b * ch + c) * s.time..(b * ch + c + 1) * s.time;
            let dys = &output_grad.data()[range.clone()];
            let xhs = &cache.xhat.data()[range.clone()];
            for ((d, &dy), &xh) in dx.data_mut()[range].iter_mut().zip(dys).zip(xhs) {
                *d = T::from_f64(k * (n * dy.as_f64() - sum_dy - xh.as_f64() * sum_dy_xhat));
            }
        }
    }
    dx.debug_assert_finite("batchnorm_backward");
    Ok(LayerGrads {
        input_grad: dx,
        param_grads: vec![
            ParamGrad {
                name: "gamma",
                shape: vec![ch],
                data: dgamma,
            },
            ParamGrad {
                name: "beta",
                shape: vec![ch],
                data: dbeta,
            },
        ],
    })
}
