use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::windows::{FeatureSeries, SampleSet, VehicleKey};
use crate::{Error, Result};

pub const CACHE_FORMAT_VERSION: u32 = 1;

/// Where a cache came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Tracks files in recording-index order.
    pub recordings: Vec<String>,
    pub seed: u64,
    pub num_folds: usize,
    pub t_h: f64,
}

/// Prepared data: per-vehicle feature series plus their fold assignment.
/// Windows of any length can be rebuilt from it without touching the
/// recordings again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCache {
    pub format_version: u32,
    pub scaled: bool,
    pub window_len: usize,
    pub provenance: Provenance,
    /// Fold of each entry of `series`.
    pub folds: Vec<usize>,
    pub series: Vec<FeatureSeries>,
}

impl SampleCache {
    pub fn new(
        provenance: Provenance,
        window_len: usize,
        series: Vec<FeatureSeries>,
        assignment: &BTreeMap<VehicleKey, usize>,
    ) -> Result<Self> {
        let folds = series
            .iter()
            .map(|s| {
                assignment
                    .get(&s.key())
                    .copied()
                    .ok_or_else(|| Error::data(format!("vehicle {:?} has no fold", s.key())))
            })
            .collect::<Result<_>>()?;
        Ok(Self { format_version: CACHE_FORMAT_VERSION, scaled: false, window_len, provenance, folds, series })
    }

    pub fn assignment(&self) -> BTreeMap<VehicleKey, usize> {
        self.series.iter().zip(&self.folds).map(|(s, &f)| (s.key(), f)).collect()
    }

    pub fn num_folds(&self) -> usize {
        self.provenance.num_folds
    }

    /// All windows of length `window_len` together with per-fold sample indices.
    pub fn sample_set(&self, window_len: usize) -> Result<(SampleSet, Vec<Vec<usize>>)> {
        let set = SampleSet::from_series(self.series.iter().cloned().map(Arc::new).collect(), window_len)?;
        let folds = super::sampling::folds_from_assignment(&set, &self.assignment(), self.num_folds());
        Ok((set, folds))
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CACHE_FORMAT_VERSION {
            return Err(Error::input(format!("unsupported cache format version {}", self.format_version)));
        }
        if self.folds.len() != self.series.len() || self.folds.iter().any(|&f| f >= self.num_folds()) {
            return Err(Error::input("cache fold assignment is inconsistent"));
        }
        for s in &self.series {
            if s.ttlcl.len() != s.len() || s.ttlcr.len() != s.len() {
                return Err(Error::input(format!("series of vehicle {} has mismatched labels", s.vehicle_id)));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cache: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cache.validate()?;
        Ok(cache)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn round_trip_and_rewindow() {
        let series: Vec<_> = (0..4)
            .map(|v| FeatureSeries {
                recording: 0,
                vehicle_id: v,
                first_frame: 0,
                features: Array2::from_elem((10, 3), 0.1 * v as f64),
                ttlcl: vec![7.0; 10],
                ttlcr: vec![7.0; 10],
            })
            .collect();
        let assignment = (0..4).map(|v| ((0, v), v as usize % 2)).collect();
        let prov = Provenance { recordings: vec!["a.csv".into()], seed: 1, num_folds: 2, t_h: 0.2 };
        let cache = SampleCache::new(prov, 5, series, &assignment).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        cache.save(&path).unwrap();
        let back = SampleCache::load(&path).unwrap();
        assert_eq!(back, cache);
        let (set, folds) = back.sample_set(4).unwrap();
        assert_eq!(set.len(), 4 * 7);
        assert_eq!(folds[0].len(), 14);
        assert_eq!(folds[1].len(), 14);
    }
}
