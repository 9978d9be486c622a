//! Adam and the mini-batch training loop.

mod adam;
mod train;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use train::{evaluate_mse, predict, train, EpochRecord, TrainConfig, TrainTrace};
