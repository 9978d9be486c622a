use serde::{Deserialize, Serialize};

use super::params::ModelParams;

/// How the per-feature weight sums are formed before normalization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMode {
    /// Sum of absolute weights; cannot cancel.
    #[default]
    Absolute,
    /// Literal signed sum of weights.
    Signed,
}

impl std::str::FromStr for ImportanceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absolute" => Ok(Self::Absolute),
            "signed" => Ok(Self::Signed),
            other => Err(format!("unknown importance mode '{other}' (absolute|signed)")),
        }
    }
}

/// Relative importance of each input feature: the sum of all input-kernel
/// weights connecting the feature to the LSTM units (every gate), normalized
/// so the vector sums to 1. A zero total yields the uniform vector.
pub fn feature_importance(params: &ModelParams, mode: ImportanceMode) -> Vec<f64> {
    let raw: Vec<f64> = params
        .lstm
        .input_kernel
        .columns()
        .into_iter()
        .map(|col| match mode {
            ImportanceMode::Absolute => col.iter().map(|w| w.abs()).sum(),
            ImportanceMode::Signed => col.sum(),
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        return vec![1.0 / raw.len() as f64; raw.len()];
    }
    raw.into_iter().map(|r| r / total).collect()
}
