//! Residual 1-D convolutional network for sequence-to-sequence ECG rhythm
//! labeling: numeric kernels with hand-derived gradients, the 34-layer
//! network, its training loop, sequence/set F1 evaluation and a synthetic
//! ECG corpus generator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod run;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
