//! The residual sequence-labeling network and its configuration.

mod check;
mod config;
mod network;
mod params;

pub use check::composite_grad_check;
pub use config::NetworkConfig;
pub use network::{labels_from_logits, Logits, Network, Tape, BN_EPSILON, BN_MOMENTUM};
pub use params::{Gradients, NamedArray, ParamKind, Parameters};
