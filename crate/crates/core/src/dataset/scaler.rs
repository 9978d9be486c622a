use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::windows::{FeatureSeries, Sample, SampleSet};
use crate::{Error, Result};

/// Lower bound applied to every fitted standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature standardization `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dim(x.ncols())?;
        let mean = Array1::from(self.mean.clone());
        let std = Array1::from(self.std.clone());
        Ok((&x - &mean.insert_axis(Axis(0))) / &std.insert_axis(Axis(0)))
    }

    pub fn inverse_transform(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dim(z.ncols())?;
        let mean = Array1::from(self.mean.clone());
        let std = Array1::from(self.std.clone());
        Ok(&z * &std.insert_axis(Axis(0)) + &mean.insert_axis(Axis(0)))
    }

    fn check_dim(&self, cols: usize) -> Result<()> {
        if cols != self.dim() {
            return Err(Error::input(format!("scaler has {} features, data has {cols}", self.dim())));
        }
        Ok(())
    }
}

/// How many of the set's windows contain each row of each series.
fn row_weights(set: &SampleSet) -> BTreeMap<u32, Vec<f64>> {
    let t = set.window_len();
    let mut diffs: BTreeMap<u32, Vec<i64>> = BTreeMap::new();
    for s in set.samples() {
        let n = set.series()[s.series as usize].len();
        let d = diffs.entry(s.series).or_insert_with(|| vec![0; n + 1]);
        d[s.end as usize + 1 - t] += 1;
        d[s.end as usize + 1] -= 1;
    }
    diffs
        .into_iter()
        .map(|(k, d)| {
            let mut acc = 0i64;
            let w = d[..d.len() - 1]
                .iter()
                .map(|&x| {
                    acc += x;
                    acc as f64
                })
                .collect();
            (k, w)
        })
        .collect()
}

/// Mean and (population) standard deviation of every feature over all frames
/// of all windows in `set`; a frame shared by several windows counts once
/// per window.
pub fn fit_scaler(set: &SampleSet) -> Result<FeatureScaler> {
    if set.is_empty() {
        return Err(Error::input("cannot fit a scaler on an empty sample set"));
    }
    let dim = set.series()[set.samples()[0].series as usize].features.ncols();
    let weights = row_weights(set);
    let mut total = 0.0;
    let mut sum = vec![0.0; dim];
    for (&si, w) in &weights {
        let feats = &set.series()[si as usize].features;
        for (row, &wr) in feats.rows().into_iter().zip(w) {
            if wr == 0.0 {
                continue;
            }
            total += wr;
            for (acc, v) in sum.iter_mut().zip(row) {
                *acc += wr * v;
            }
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / total).collect();
    let mut sq = vec![0.0; dim];
    for (&si, w) in &weights {
        let feats = &set.series()[si as usize].features;
        for (row, &wr) in feats.rows().into_iter().zip(w) {
            if wr == 0.0 {
                continue;
            }
            for ((acc, v), m) in sq.iter_mut().zip(row).zip(&mean) {
                *acc += wr * (v - m) * (v - m);
            }
        }
    }
    let std = sq.iter().map(|s| (s / total).sqrt().max(STD_FLOOR)).collect();
    Ok(FeatureScaler { mean, std })
}

/// Standardized copy of `set`. Only series referenced by a sample are kept.
pub fn apply_scaler(scaler: &FeatureScaler, set: &SampleSet) -> Result<SampleSet> {
    let mut remap: BTreeMap<u32, u32> = BTreeMap::new();
    let mut series = Vec::new();
    for s in set.samples() {
        if !remap.contains_key(&s.series) {
            let src = &set.series()[s.series as usize];
            let scaled = FeatureSeries { features: scaler.transform(src.features.view())?, ..(**src).clone() };
            remap.insert(s.series, series.len() as u32);
            series.push(Arc::new(scaled));
        }
    }
    let samples = set
        .samples()
        .iter()
        .map(|s| Sample { series: remap[&s.series], ..*s })
        .collect();
    Ok(SampleSet::from_parts(set.window_len(), series, samples, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn set_from(feats: Vec<Array2<f64>>, t: usize) -> SampleSet {
        let series = feats
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                let n = f.nrows();
                Arc::new(FeatureSeries {
                    recording: 0,
                    vehicle_id: i as u32,
                    first_frame: 0,
                    features: f,
                    ttlcl: vec![7.0; n],
                    ttlcr: vec![7.0; n],
                })
            })
            .collect();
        SampleSet::from_series(series, t).unwrap()
    }

    /// Brute force: stack every window's rows explicitly.
    fn stacked(set: &SampleSet) -> Array2<f64> {
        let views: Vec<_> = (0..set.len()).map(|i| set.window(i)).collect();
        ndarray::concatenate(Axis(0), &views).unwrap()
    }

    fn wavy(n: usize, seed: f64) -> Array2<f64> {
        Array2::from_shape_fn((n, 3), |(r, c)| ((r as f64 + seed) * (0.3 + c as f64)).sin() * (c + 1) as f64 + c as f64)
    }

    #[test]
    fn weighted_fit_equals_stacked_windows() {
        let set = set_from(vec![wavy(12, 0.0), wavy(9, 5.0)], 4);
        let set = set.subset(&[0, 2, 3, 7, 8, 11]);
        let sc = fit_scaler(&set).unwrap();
        let st = stacked(&set);
        for c in 0..3 {
            let col = st.column(c);
            let m = col.mean().unwrap();
            let sd = col.mapv(|v| (v - m) * (v - m)).mean().unwrap().sqrt();
            assert!((sc.mean[c] - m).abs() < 1e-12);
            assert!((sc.std[c] - sd).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_feature_gets_floor_and_maps_to_zero() {
        let mut f = wavy(10, 1.0);
        f.column_mut(1).fill(3.5);
        let set = set_from(vec![f], 3);
        let sc = fit_scaler(&set).unwrap();
        assert_eq!(sc.std[1], STD_FLOOR);
        let scaled = apply_scaler(&sc, &set).unwrap();
        assert!(scaled.is_scaled());
        assert!(stacked(&scaled).column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn refit_on_scaled_is_standard() {
        let set = set_from(vec![wavy(30, 0.0), wavy(25, 2.0)], 5);
        let scaled = apply_scaler(&fit_scaler(&set).unwrap(), &set).unwrap();
        let re = fit_scaler(&scaled).unwrap();
        for c in 0..3 {
            assert!(re.mean[c].abs() < 1e-9);
            assert!((re.std[c] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let x = wavy(20, 3.0);
        let set = set_from(vec![x.clone()], 2);
        let sc = fit_scaler(&set).unwrap();
        let back = sc.inverse_transform(sc.transform(x.view()).unwrap().view()).unwrap();
        assert!((back - &x).iter().all(|d| d.abs() < 1e-9));
    }

    #[test]
    fn empty_set_is_rejected() {
        let set = set_from(vec![wavy(3, 0.0)], 5);
        assert!(fit_scaler(&set).is_err());
    }
}
