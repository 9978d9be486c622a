//! Recurrent regression network: one LSTM layer, one hidden ReLU dense layer
//! and a two-unit ReLU output layer predicting (TTLCL, TTLCR).
//!
//! Everything is `f64`. Batches are processed time-major so every step is a
//! pair of matrix products; the backward pass is exact backpropagation
//! through time over the whole window.

mod backward;
mod forward;
mod importance;
mod loss;
mod params;
pub mod serde_arrays;

pub use backward::{backward, backward_batch, Gradients};
pub use forward::{forward, forward_batch, lstm_step, sigmoid, LstmState, SequenceBatch};
pub use importance::{feature_importance, ImportanceMode};
pub use loss::mse_loss;
pub use params::{Activation, DenseLayerParams, LstmLayerParams, ModelParams, MODEL_FORMAT_VERSION};

/// Number of network outputs: TTLCL and TTLCR.
pub const NUM_OUTPUTS: usize = 2;
