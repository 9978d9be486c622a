use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bins::{ttlc_bin_stats, Channel, TtlcBinStats};
use super::classify::{class_report, classify_within, ClassReport};
use super::rmse::{rmse_table, RmseTable};
use crate::dataset::{apply_scaler, balance_by_maneuver, label_maneuver, undersample_flw, SampleSet};
use crate::nn::ModelParams;
use crate::optim::predict;
use crate::{Error, Result, MAX_TTLC};

/// How the evaluation samples are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Every maneuver class downsampled to the rarest one.
    Balanced,
    /// Lane following reduced to one third, as during training.
    Undersampled,
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(EvalMode::Balanced),
            "undersampled" => Ok(EvalMode::Undersampled),
            _ => Err(Error::config(format!("unknown evaluation mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub horizon: f64,
    pub bin_width: f64,
    pub num_samples: usize,
    /// Single-label counts at `horizon`, LCL/FLW/LCR.
    pub class_counts: [usize; 3],
    pub rmse: RmseTable,
    /// Same table for the constant (7, 7) predictor.
    pub baseline_rmse: RmseTable,
    pub bins_left: TtlcBinStats,
    pub bins_right: TtlcBinStats,
    pub classification: ClassReport,
}

/// Runs `model` on `set` (unscaled) after selecting samples per `mode`.
pub fn evaluate(
    model: &ModelParams,
    set: &SampleSet,
    mode: EvalMode,
    horizon: f64,
    bin_width: f64,
    seed: u64,
) -> Result<EvalReport> {
    let selected = match mode {
        EvalMode::Balanced => balance_by_maneuver(set, horizon, seed)?,
        EvalMode::Undersampled => undersample_flw(set, seed),
    };
    if selected.is_empty() {
        return Err(Error::input("no evaluation samples"));
    }
    let scaled = apply_scaler(&model.scaler, &selected)?;
    let pred = predict(model, &scaled)?;
    let truth = selected.targets();
    let constant = vec![[MAX_TTLC, MAX_TTLC]; truth.len()];
    let predicted: Vec<_> = pred.iter().map(|p| classify_within(p[0], p[1], horizon)).collect();
    let actual: Vec<_> = truth.iter().map(|t| label_maneuver(t[0], t[1], horizon)).collect();
    Ok(EvalReport {
        mode,
        horizon,
        bin_width,
        num_samples: selected.len(),
        class_counts: selected.class_counts(horizon),
        rmse: rmse_table(&pred, &truth)?,
        baseline_rmse: rmse_table(&constant, &truth)?,
        bins_left: ttlc_bin_stats(&pred, &truth, bin_width, Channel::Left)?,
        bins_right: ttlc_bin_stats(&pred, &truth, bin_width, Channel::Right)?,
        classification: class_report(&predicted, &actual)?,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `report.json` plus one CSV per table and per error curve.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        self.rmse.write_csv(std::fs::File::create(dir.join("rmse_table.csv"))?)?;
        self.baseline_rmse.write_csv(std::fs::File::create(dir.join("baseline_rmse_table.csv"))?)?;
        self.bins_left.write_csv(std::fs::File::create(dir.join("ttlc_bins_left.csv"))?)?;
        self.bins_right.write_csv(std::fs::File::create(dir.join("ttlc_bins_right.csv"))?)?;
        self.classification.write_csv(std::fs::File::create(dir.join("class_report.csv"))?)?;
        Ok(())
    }
}
