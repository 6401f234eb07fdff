//! Bias-corrected Adam.

use crate::error::{Error, Result};
use crate::model::{Gradients, ParamKind, Parameters};
use crate::tensor::Real;

pub const DEFAULT_LR: f64 = 1e-3;
pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Moment estimates aligned index-for-index with a [`Parameters`] set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    /// Zero moments at the default hyper-parameters.
    pub fn new(params: &Parameters<T>) -> Self {
        let zeros: Vec<Vec<T>> = params.arrays().iter().map(|a| vec![T::zero(); a.len()]).collect();
        AdamState {
            step: 0,
            lr: DEFAULT_LR,
            beta1: BETA1,
            beta2: BETA2,
            eps: ADAM_EPSILON,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn check_layout(&self, params: &Parameters<T>, grads: &Gradients<T>) -> Result<()> {
        let arrays = params.arrays();
        let ok = self.m.len() == arrays.len()
            && self.v.len() == arrays.len()
            && grads.arrays.len() == arrays.len()
            && arrays.iter().enumerate().all(|(i, a)| {
                self.m[i].len() == a.len() && self.v[i].len() == a.len() && grads.arrays[i].len() == a.len()
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(
                "optimizer state, gradients and parameters disagree in shape".into(),
            ))
        }
    }
}

/// `θ ← θ − lr·m̂/(√v̂ + eps)` on every learnable array.
///
/// Non-finite gradients abort the step before anything is modified.
pub fn adam_step<T: Real>(params: &mut Parameters<T>, grads: &Gradients<T>, state: &mut AdamState<T>) -> Result<()> {
    state.check_layout(params, grads)?;
    if !(state.lr > 0.0) {
        return Err(Error::Contract(format!(
            "learning rate must be positive, got {}",
            state.lr
        )));
    }
    for (a, g) in params.arrays().iter().zip(&grads.arrays) {
        if a.kind == ParamKind::Learnable && !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteGradient { param: a.name.clone() });
        }
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let correction1 = 1.0 - b1.powf(state.step as f64);
    let correction2 = 1.0 - b2.powf(state.step as f64);
    for (i, array) in params.arrays_mut().iter_mut().enumerate() {
        if array.kind != ParamKind::Learnable {
            continue;
        }
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (((theta, &g), m), v) in array
            .data
            .iter_mut()
            .zip(&grads.arrays[i])
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            let g = g.as_f64();
            let m_new = b1 * m.as_f64() + (1.0 - b1) * g;
            let v_new = b2 * v.as_f64() + (1.0 - b2) * g * g;
            *m = T::from_f64(m_new);
            *v = T::from_f64(v_new);
            let update = state.lr * (m_new / correction1) / ((v_new / correction2).sqrt() + state.eps);
            *theta = T::from_f64(theta.as_f64() - update);
        }
    }
    Ok(())
}
