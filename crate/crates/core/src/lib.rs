//! Time-to-lane-change (TTLC) prediction for surrounding highway vehicles.
//!
//! The crate covers the whole workflow: a from-scratch LSTM regression
//! network with exact backpropagation through time ([`nn`]), Adam training
//! ([`optim`]), highD-schema ingestion and sample preparation ([`dataset`]),
//! a synthetic traffic generator producing the same schema ([`synthgen`]),
//! grid search with grouped cross validation ([`pipeline`]) and the
//! evaluation reports ([`eval`]).

pub mod dataset;
pub mod error;
pub mod eval;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};

/// Sampling rate of every recording, in Hz.
pub const FRAME_RATE: f64 = 25.0;

/// Upper clip of every TTLC label, in seconds.
pub const MAX_TTLC: f64 = 7.0;

/// Number of input features per time step.
pub const NUM_FEATURES: usize = 21;
