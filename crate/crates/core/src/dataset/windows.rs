use std::sync::Arc;

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::features::features_for;
use super::labels::{find_lane_crossings, label_maneuver, label_sample, Maneuver};
use super::recording::TrajectoryRecording;
use crate::nn::{serde_arrays, SequenceBatch};
use crate::{Error, Result, NUM_FEATURES};

/// Identifies one vehicle across recordings.
pub type VehicleKey = (u32, u32);

/// Per-frame features and labels of one vehicle trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSeries {
    pub recording: u32,
    pub vehicle_id: u32,
    pub first_frame: i64,
    /// `[frames × F]`
    #[serde(with = "serde_arrays::matrix")]
    pub features: Array2<f64>,
    pub ttlcl: Vec<f64>,
    pub ttlcr: Vec<f64>,
}

impl FeatureSeries {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn key(&self) -> VehicleKey {
        (self.recording, self.vehicle_id)
    }
}

/// Features and TTLC labels for every vehicle of a recording.
pub fn extract_series(recording: &TrajectoryRecording, recording_index: u32) -> Result<Vec<FeatureSeries>> {
    let geometry = recording.geometry();
    recording
        .trajectories()
        .iter()
        .map(|traj| {
            let crossings = find_lane_crossings(traj, geometry);
            let mut features = Array2::zeros((traj.len(), NUM_FEATURES));
            let mut ttlcl = Vec::with_capacity(traj.len());
            let mut ttlcr = Vec::with_capacity(traj.len());
            for (row, frame) in traj.frames.iter().enumerate() {
                let fv = features_for(recording, frame)?;
                features.row_mut(row).assign(&ndarray::ArrayView1::from(&fv.0));
                let (l, r) = label_sample(frame.frame, &crossings);
                ttlcl.push(l);
                ttlcr.push(r);
            }
            Ok(FeatureSeries {
                recording: recording_index,
                vehicle_id: traj.vehicle_id,
                first_frame: traj.first_frame(),
                features,
                ttlcl,
                ttlcr,
            })
        })
        .collect()
}

/// One training example: the window ending at row `end` of series `series`,
/// labelled at that frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub series: u32,
    pub end: u32,
    pub ttlcl: f64,
    pub ttlcr: f64,
    pub recording: u32,
    pub vehicle_id: u32,
    pub frame: i64,
}

impl Sample {
    pub fn key(&self) -> VehicleKey {
        (self.recording, self.vehicle_id)
    }

    pub fn maneuver(&self, horizon: f64) -> Maneuver {
        label_maneuver(self.ttlcl, self.ttlcr, horizon)
    }

    pub fn target(&self) -> [f64; 2] {
        [self.ttlcl, self.ttlcr]
    }
}

/// Samples of window length `T` over a shared pool of feature series.
/// Windows are views into the series, so subsets are cheap.
#[derive(Debug, Clone)]
pub struct SampleSet {
    window_len: usize,
    series: Vec<Arc<FeatureSeries>>,
    samples: Vec<Sample>,
    scaled: bool,
}

impl SampleSet {
    /// Every frame with at least `window_len - 1` predecessors becomes a sample.
    pub fn from_series(series: Vec<Arc<FeatureSeries>>, window_len: usize) -> Result<Self> {
        if window_len == 0 {
            return Err(Error::config("window length must be at least 1"));
        }
        let mut samples = Vec::new();
        for (si, s) in series.iter().enumerate() {
            for end in window_len.saturating_sub(1)..s.len() {
                samples.push(Sample {
                    series: si as u32,
                    end: end as u32,
                    ttlcl: s.ttlcl[end],
                    ttlcr: s.ttlcr[end],
                    recording: s.recording,
                    vehicle_id: s.vehicle_id,
                    frame: s.first_frame + end as i64,
                });
            }
        }
        Ok(Self { window_len, series, samples, scaled: false })
    }

    pub(crate) fn from_parts(
        window_len: usize,
        series: Vec<Arc<FeatureSeries>>,
        samples: Vec<Sample>,
        scaled: bool,
    ) -> Self {
        Self { window_len, series, samples, scaled }
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_scaled(&self) -> bool {
        self.scaled
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn series(&self) -> &[Arc<FeatureSeries>] {
        &self.series
    }

    /// `[T × F]` window of sample `i`.
    pub fn window(&self, i: usize) -> ArrayView2<'_, f64> {
        let s = &self.samples[i];
        let end = s.end as usize;
        self.series[s.series as usize]
            .features
            .slice(s![end + 1 - self.window_len..=end, ..])
    }

    pub fn targets(&self) -> Vec<[f64; 2]> {
        self.samples.iter().map(Sample::target).collect()
    }

    /// Samples at the given positions, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            window_len: self.window_len,
            series: self.series.clone(),
            samples: indices.iter().map(|&i| self.samples[i]).collect(),
            scaled: self.scaled,
        }
    }

    /// Concatenation; both sets must share the window length and scaling state.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.window_len != other.window_len || self.scaled != other.scaled {
            return Err(Error::config("cannot concatenate sample sets of different shape or scaling"));
        }
        let offset = self.series.len() as u32;
        let mut series = self.series.clone();
        series.extend(other.series.iter().cloned());
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().map(|s| Sample { series: s.series + offset, ..*s }));
        Ok(Self { window_len: self.window_len, series, samples, scaled: self.scaled })
    }

    pub fn batch(&self, indices: &[usize]) -> Result<SequenceBatch> {
        let views: Vec<_> = indices.iter().map(|&i| self.window(i)).collect();
        SequenceBatch::from_windows(&views)
    }

    /// Counts per single-label class at `horizon`, in LCL, FLW, LCR order.
    pub fn class_counts(&self, horizon: f64) -> [usize; 3] {
        let mut c = [0; 3];
        for s in &self.samples {
            c[s.maneuver(horizon).index()] += 1;
        }
        c
    }

    pub fn num_vehicles(&self) -> usize {
        let mut keys: Vec<_> = self.samples.iter().map(Sample::key).collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }
}

/// All windows of length `window_len` in a recording.
pub fn build_windows(recording: &TrajectoryRecording, window_len: usize) -> Result<SampleSet> {
    let series = extract_series(recording, 0)?.into_iter().map(Arc::new).collect();
    SampleSet::from_series(series, window_len)
}
