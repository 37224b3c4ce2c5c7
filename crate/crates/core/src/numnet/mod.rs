//! Deterministic feed-forward ReLU networks with survey-weighted losses,
//! exact backpropagation and Adam.

pub mod gradcheck;
mod loss;
mod network;
mod train;

pub use loss::{
    evaluate, loss_value, pinball_loss, weighted_cross_entropy, weighted_mse, weighted_pinball, LossKind,
    LossValue, Observations, Targets,
};
pub use network::{log_softmax, relu, softmax, Layer, NetworkParams};
pub use train::{train, train_from, weighted_mean_sd, BatchSize, TrainConfig, TrainedNetwork};
