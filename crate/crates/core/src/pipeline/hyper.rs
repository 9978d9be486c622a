use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, FRAME_RATE};

/// One point of the hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n_lstm: usize,
    pub n_dense: usize,
    /// Feature history in seconds.
    pub t_h: f64,
    pub learning_rate: f64,
}

impl Hyperparams {
    /// Time steps per window, `round(25 · t_h)`.
    pub fn window_len(&self) -> usize {
        (FRAME_RATE * self.t_h).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_lstm == 0 || self.n_dense == 0 {
            return Err(Error::config("layer sizes must be at least 1"));
        }
        if !(self.t_h.is_finite() && self.t_h > 0.0) || self.window_len() == 0 {
            return Err(Error::config(format!("history t_h = {} s yields no time steps", self.t_h)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(format!("invalid learning rate {}", self.learning_rate)));
        }
        Ok(())
    }

    /// Ordering used to break ties between equally scored combinations:
    /// smaller n_lstm, then smaller n_dense, then shorter t_h, then larger α.
    pub fn tie_break(&self, other: &Self) -> std::cmp::Ordering {
        self.n_lstm
            .cmp(&other.n_lstm)
            .then(self.n_dense.cmp(&other.n_dense))
            .then(self.t_h.total_cmp(&other.t_h))
            .then(other.learning_rate.total_cmp(&self.learning_rate))
    }
}

/// Candidate values per hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_lstm: Vec<usize>,
    pub n_dense: Vec<usize>,
    pub t_h: Vec<f64>,
    pub learning_rate: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            n_lstm: vec![64, 128, 256],
            n_dense: vec![16, 32, 64],
            t_h: vec![1.0, 3.0, 5.0],
            learning_rate: vec![0.001, 0.0003],
        }
    }
}

impl Grid {
    pub fn singleton(hp: Hyperparams) -> Self {
        Self { n_lstm: vec![hp.n_lstm], n_dense: vec![hp.n_dense], t_h: vec![hp.t_h], learning_rate: vec![hp.learning_rate] }
    }

    /// Every combination, row-major in declaration order (learning rate fastest).
    pub fn combinations(&self) -> Vec<Hyperparams> {
        let mut out = Vec::new();
        for &n_lstm in &self.n_lstm {
            for &n_dense in &self.n_dense {
                for &t_h in &self.t_h {
                    for &learning_rate in &self.learning_rate {
                        out.push(Hyperparams { n_lstm, n_dense, t_h, learning_rate });
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let combos = self.combinations();
        if combos.is_empty() {
            return Err(Error::config("hyperparameter grid is empty"));
        }
        combos.iter().try_for_each(Hyperparams::validate)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let g: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
