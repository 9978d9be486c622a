use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::hyper::{Grid, Hyperparams};
use crate::dataset::{
    apply_scaler, assign_vehicle_folds, fit_scaler, folds_from_assignment, undersample_flw, FeatureSeries, SampleSet,
    VehicleKey,
};
use crate::nn::ModelParams;
use crate::optim::{evaluate_mse, train, TrainConfig, TrainTrace};
use crate::rng::{derive_seed, TAG_INIT, TAG_INNER_SPLIT, TAG_SHUFFLE, TAG_UNDERSAMPLE};
use crate::{Error, Result, MAX_TTLC};

/// Training settings shared by every fit; learning rate and window come from
/// the hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub clip_norm: Option<f64>,
    /// The early-stopping holdout is one of this many vehicle-grouped parts.
    pub holdout_folds: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            early_stop_patience: t.early_stop_patience,
            clip_norm: t.clip_norm,
            holdout_folds: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: ModelParams,
    pub trace: TrainTrace,
    /// Vehicles used for early stopping.
    pub holdout: Vec<VehicleKey>,
}

fn union_except(set: &SampleSet, folds: &[Vec<usize>], skip: usize) -> SampleSet {
    let mut idx: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    idx.sort_unstable();
    set.subset(&idx)
}

/// Trains one model on `pool`: a vehicle-grouped part is held out for early
/// stopping, both parts are undersampled, the scaler is fitted on the
/// training part only, and the best-validation epoch is returned.
pub fn fit_model(pool: &SampleSet, hp: Hyperparams, cfg: &FitConfig, seed: u64) -> Result<FitOutcome> {
    hp.validate()?;
    if pool.window_len() != hp.window_len() {
        return Err(Error::config(format!(
            "samples have {} steps, hyperparameters need {}",
            pool.window_len(),
            hp.window_len()
        )));
    }
    if pool.is_scaled() {
        return Err(Error::input("fit_model expects unscaled samples"));
    }
    let keys: Vec<_> = pool.samples().iter().map(|s| s.key()).collect();
    let nv = pool.num_vehicles();
    let k = cfg.holdout_folds.min(nv);
    let assignment = assign_vehicle_folds(&keys, k, derive_seed(seed, &[TAG_INNER_SPLIT]))?;
    let holdout: Vec<VehicleKey> = assignment.iter().filter(|(_, &f)| f == 0).map(|(&key, _)| key).collect();
    let folds = folds_from_assignment(pool, &assignment, k);
    let train_raw = union_except(pool, &folds, 0);
    let val_raw = pool.subset(&folds[0]);

    let train_us = undersample_flw(&train_raw, derive_seed(seed, &[TAG_UNDERSAMPLE, 0]));
    let val_us = undersample_flw(&val_raw, derive_seed(seed, &[TAG_UNDERSAMPLE, 1]));
    if train_us.is_empty() || val_us.is_empty() {
        return Err(Error::input("not enough samples for a training and an early-stopping split"));
    }
    let scaler = fit_scaler(&train_us)?;
    let train_set = apply_scaler(&scaler, &train_us)?;
    let val_set = apply_scaler(&scaler, &val_us)?;

    let model = ModelParams::init(hp, scaler.dim(), scaler, derive_seed(seed, &[TAG_INIT]))?;
    let tc = TrainConfig {
        batch_size: cfg.batch_size,
        max_epochs: cfg.max_epochs,
        early_stop_patience: cfg.early_stop_patience,
        seed: derive_seed(seed, &[TAG_SHUFFLE]),
        learning_rate: hp.learning_rate,
        clip_norm: cfg.clip_norm,
    };
    let (model, trace) = train(model, &train_set, &val_set, &tc)?;
    Ok(FitOutcome { model, trace, holdout })
}

/// Validation MSE of `model` on `set` prepared the way training data is:
/// undersampled with `seed`, then standardized with the model's scaler.
pub fn undersampled_mse(model: &ModelParams, set: &SampleSet, seed: u64) -> Result<f64> {
    let us = undersample_flw(set, seed);
    evaluate_mse(model, &apply_scaler(&model.scaler, &us)?)
}

/// One model per fold, each validated on the fold it did not see.
pub fn cross_validate(
    set: &SampleSet,
    folds: &[Vec<usize>],
    hp: Hyperparams,
    cfg: &FitConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if folds.len() < 2 {
        return Err(Error::config("cross validation needs at least 2 folds"));
    }
    (0..folds.len())
        .map(|k| {
            let fold_seed = derive_seed(seed, &[k as u64]);
            let train_pool = union_except(set, folds, k);
            let fit = fit_model(&train_pool, hp, cfg, fold_seed)?;
            undersampled_mse(&fit.model, &set.subset(&folds[k]), derive_seed(fold_seed, &[TAG_UNDERSAMPLE, 2]))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub hyper: Hyperparams,
    pub fold_mse: Vec<f64>,
    pub mean_mse: Option<f64>,
    pub failure: Option<String>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub best: Hyperparams,
    pub best_mean_mse: f64,
}

#[derive(Serialize)]
struct GridCsvRow {
    n_lstm: usize,
    n_dense: usize,
    t_h: f64,
    learning_rate: f64,
    fold: Option<usize>,
    val_mse: Option<f64>,
    mean_mse: Option<f64>,
    status: String,
    wall_ms: u64,
}

impl GridResult {
    /// One line per combination and fold; failed combinations get one line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            let h = r.hyper;
            let row = |fold, val_mse, status: &str| GridCsvRow {
                n_lstm: h.n_lstm,
                n_dense: h.n_dense,
                t_h: h.t_h,
                learning_rate: h.learning_rate,
                fold,
                val_mse,
                mean_mse: r.mean_mse,
                status: status.to_string(),
                wall_ms: r.wall_ms,
            };
            match &r.failure {
                Some(msg) => w.serialize(row(None, None, &format!("failed: {msg}")))?,
                None => {
                    for (k, &m) in r.fold_mse.iter().enumerate() {
                        w.serialize(row(Some(k), Some(m), "ok"))?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            best: &'a Hyperparams,
            best_mean_mse: f64,
            evaluated: usize,
            failed: usize,
        }
        let failed = self.rows.iter().filter(|r| r.failure.is_some()).count();
        Ok(serde_json::to_string_pretty(&Summary {
            best: &self.best,
            best_mean_mse: self.best_mean_mse,
            evaluated: self.rows.len(),
            failed,
        })?)
    }
}

/// Exhaustive grid search. Vehicles are assigned to `k` folds once, so every
/// combination sees the same partition regardless of its window length.
/// Diverging combinations are recorded as failures.
pub fn grid_search(
    series: &[Arc<FeatureSeries>],
    grid: &Grid,
    k: usize,
    cfg: &FitConfig,
    seed: u64,
) -> Result<GridResult> {
    grid.validate()?;
    let keys: Vec<_> = series.iter().map(|s| s.key()).collect();
    let assignment = assign_vehicle_folds(&keys, k, seed)?;
    let mut rows = Vec::new();
    for (ci, hp) in grid.combinations().into_iter().enumerate() {
        let started = Instant::now();
        let set = SampleSet::from_series(series.to_vec(), hp.window_len())?;
        let folds = folds_from_assignment(&set, &assignment, k);
        let outcome = cross_validate(&set, &folds, hp, cfg, derive_seed(seed, &[ci as u64]));
        let wall_ms = started.elapsed().as_millis() as u64;
        let row = match outcome {
            Ok(fold_mse) => {
                let mean = fold_mse.iter().sum::<f64>() / fold_mse.len() as f64;
                GridRow { hyper: hp, fold_mse, mean_mse: Some(mean), failure: None, wall_ms }
            }
            Err(e @ (Error::Training { .. } | Error::Input(_))) => {
                GridRow { hyper: hp, fold_mse: vec![], mean_mse: None, failure: Some(e.to_string()), wall_ms }
            }
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    let (best, best_mean_mse) = select_best(&rows)?;
    Ok(GridResult { rows, best, best_mean_mse })
}

/// Minimal mean MSE with the documented tie-break.
pub fn select_best(rows: &[GridRow]) -> Result<(Hyperparams, f64)> {
    rows.iter()
        .filter_map(|r| r.mean_mse.map(|m| (r.hyper, m)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.tie_break(&b.0)))
        .ok_or_else(|| Error::Pipeline("every grid combination failed".into()))
}

/// Final model on all of `pool` (test data already removed).
pub fn train_final(pool: &SampleSet, hp: Hyperparams, cfg: &FitConfig, seed: u64) -> Result<FitOutcome> {
    fit_model(pool, hp, cfg, seed)
}

/// MSE of always predicting (7, 7).
pub fn constant_baseline_mse(set: &SampleSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::input("empty sample set"));
    }
    let sum: f64 = set
        .samples()
        .iter()
        .map(|s| (s.ttlcl - MAX_TTLC).powi(2) + (s.ttlcr - MAX_TTLC).powi(2))
        .sum();
    Ok(sum / (2 * set.len()) as f64)
}

/// Samples of every fold except `test_fold`.
pub fn without_fold(set: &SampleSet, folds: &[Vec<usize>], test_fold: usize) -> Result<SampleSet> {
    if test_fold >= folds.len() {
        return Err(Error::config(format!("test fold {test_fold} out of range 0..{}", folds.len())));
    }
    Ok(union_except(set, folds, test_fold))
}
