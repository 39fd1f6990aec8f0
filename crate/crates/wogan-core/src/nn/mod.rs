//! Minimal dense-network machinery sized for the three networks the
//! falsifier trains: a generator, a Wasserstein critic, and a fitness
//! analyzer. Forward and reverse passes are written out explicitly, including
//! the second-order pass the gradient penalty needs.

mod adam;
mod analyzer;
mod net;
mod wgan;

pub use adam::{adam_update, AdamState};
pub use analyzer::{train_analyzer, Analyzer};
pub use net::{Activation, BackwardPass, DenseNet, Grads, Layer, Mat, Trace};
pub use wgan::{
    gradient_penalty, penalty_param_grads, penalty_param_grads_fd, train_wgan_step, Critic,
    Generator, GpGradientMode, WganHyper,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("input length {got} does not match network input dim {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("training data is empty or mismatched: {0}")]
    EmptyData(String),
}
