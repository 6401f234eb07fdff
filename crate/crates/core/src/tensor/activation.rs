use rand::Rng;

use super::{Mode, Real, Tensor};
use crate::error::{Error, Result};

pub fn relu<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    let mut out = input.clone();
    for v in out.data_mut() {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
    out
}

/// Passes the gradient where the saved input is strictly positive.
pub fn relu_backward<T: Real>(input: &Tensor<T>, output_grad: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != output_grad.shape() {
        return Err(Error::Contract(format!(
            "relu grad shape {} does not match input {}",
            output_grad.shape(),
            input.shape()
        )));
    }
    let mut dx = output_grad.clone();
    for (g, &x) in dx.data_mut().iter_mut().zip(input.data()) {
        if !(x > T::zero()) {
            *g = T::zero();
        }
    }
    Ok(dx)
}

/// Kept positions and the survivor scale of one dropout application.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<T> {
    pub keep: Vec<bool>,
    pub scale: T,
}

/// Inverted dropout: survivors are scaled by `1/(1 − rate)` in train mode so
/// that eval mode is the identity.
pub fn dropout<T: Real, R: Rng + ?Sized>(
    input: &Tensor<T>,
    rate: f64,
    rng: &mut R,
    mode: Mode,
) -> Result<(Tensor<T>, DropoutMask<T>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Contract(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    let n = input.data().len();
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((
            input.clone(),
            DropoutMask {
                keep: vec![true; n],
                scale: T::one(),
            },
        ));
    }
    let scale = T::from_f64(1.0 / (1.0 - rate));
    let keep: Vec<bool> = (0..n).map(|_| rng.random::<f64>() >= rate).collect();
    let mut out = input.clone();
    for (v, &k) in out.data_mut().iter_mut().zip(&keep) {
        *v = if k { *v * scale } else { T::zero() };
    }
    Ok((out, DropoutMask { keep, scale }))
}

pub fn dropout_backward<T: Real>(mask: &DropoutMask<T>, output_grad: &Tensor<T>) -> Result<Tensor<T>> {
    if mask.keep.len() != output_grad.data().len() {
        return Err(Error::Contract("dropout mask does not match gradient size".into()));
    }
    let mut dx = output_grad.clone();
    for (g, &k) in dx.data_mut().iter_mut().zip(&mask.keep) {
        *g = if k { *g * mask.scale } else { T::zero() };
    }
    Ok(dx)
}
