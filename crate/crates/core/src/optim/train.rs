use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use crate::dataset::SampleSet;
use crate::nn::{backward_batch, forward_batch, ModelParams};
use crate::rng::{derive_seed, stream_rng, TAG_SHUFFLE};
use crate::{Error, Result};

/// Rows per forward pass when evaluating a whole set.
const EVAL_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub learning_rate: f64,
    /// Rescale gradients whose global norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 128, max_epochs: 200, early_stop_patience: 15, seed: 0, learning_rate: 1e-3, clip_norm: None }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::config("batch_size and max_epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::config("clip_norm must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl TrainTrace {
    pub fn best_val_mse(&self) -> f64 {
        self.epochs.iter().map(|e| e.val_mse).fold(f64::INFINITY, f64::min)
    }

    /// Equality of everything except wall-clock times.
    pub fn same_losses(&self, other: &Self) -> bool {
        self.best_epoch == other.best_epoch
            && self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.train_mse.to_bits() == b.train_mse.to_bits()
                    && a.val_mse.to_bits() == b.val_mse.to_bits()
            })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.epochs {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `[N × 2]` predictions for every sample of `set`, in order.
pub fn predict(model: &ModelParams, set: &SampleSet) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::with_capacity(set.len());
    let idx: Vec<usize> = (0..set.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let y = forward_batch(model, &set.batch(chunk)?)?;
        out.extend(y.rows().into_iter().map(|r| [r[0], r[1]]));
    }
    Ok(out)
}

/// Mean squared error over all samples and both channels.
pub fn evaluate_mse(model: &ModelParams, set: &SampleSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::input("cannot evaluate on an empty set"));
    }
    let pred = predict(model, set)?;
    let sum: f64 = pred
        .iter()
        .zip(set.samples())
        .map(|(p, s)| (p[0] - s.ttlcl).powi(2) + (p[1] - s.ttlcr).powi(2))
        .sum();
    Ok(sum / (2 * set.len()) as f64)
}

/// Mini-batch Adam on `train_set`, keeping the parameters of the epoch with
/// the lowest validation MSE and stopping after `early_stop_patience` epochs
/// without improvement.
pub fn train(
    model: ModelParams,
    train_set: &SampleSet,
    val_set: &SampleSet,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainTrace)> {
    cfg.validate()?;
    model.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::input("training and validation sets must be non-empty"));
    }
    for set in [train_set, val_set] {
        if set.window_len() != model.window_len() {
            return Err(Error::input(format!(
                "samples have {} steps, model expects {}",
                set.window_len(),
                model.window_len()
            )));
        }
    }

    let mut model = model;
    let lens: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut adam = AdamState::new(&lens, cfg.learning_rate);
    let shuffle_key = derive_seed(cfg.seed, &[TAG_SHUFFLE]);
    let targets = train_set.targets();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut trace = TrainTrace::default();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        order.sort_unstable();
        order.shuffle(&mut stream_rng(shuffle_key, epoch as u64));
        let mut weighted = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train_set.batch(chunk)?;
            let t: Vec<[f64; 2]> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, mut grads) = backward_batch(&model, &batch, &t)?;
            if !loss.is_finite() {
                return Err(Error::Training { epoch, message: format!("non-finite training loss {loss}") });
            }
            if let Some(c) = cfg.clip_norm {
                let norm = grads.global_norm();
                if norm > c {
                    grads.scale(c / norm);
                }
            }
            weighted += loss * chunk.len() as f64;
            adam_step(&mut adam, &mut model.tensors_mut(), &grads.tensors())?;
        }
        let train_mse = weighted / train_set.len() as f64;
        let val_mse = evaluate_mse(&model, val_set)?;
        if !val_mse.is_finite() || model.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::Training { epoch, message: format!("non-finite validation loss {val_mse}") });
        }
        trace.epochs.push(EpochRecord { epoch, train_mse, val_mse, wall_ms: started.elapsed().as_millis() as u64 });
        if best.as_ref().is_none_or(|(b, _)| val_mse < *b) {
            best = Some((val_mse, model.clone()));
            trace.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                break;
            }
        }
    }
    let (_, best_model) = best.expect("at least one epoch");
    Ok((best_model, trace))
}
