//! The 21 per-frame input features.
//!
//! Neighbor roles are assigned per frame from the lane ids: `front`/`rear`
//! are the closest vehicles ahead/behind in the target's lane; in the right
//! lane, a vehicle within ±[`SIDE_ZONE`] m longitudinally is `right`, the
//! closest one further ahead is `front-right` and the closest one further
//! behind is `rear-right`; `left` is the alongside vehicle in the left lane.
//! Only vehicles within [`SENSOR_RANGE`] m count. Relative quantities are
//! neighbor minus target. Missing neighbors use fixed sentinels.

use super::recording::{TrajectoryRecording, VehicleFrame};
use crate::{Error, Result, NUM_FEATURES};

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "t_ml", "t_mr", "actv_fr", "actv_r", "actv_rr", "w_lane", "dx_rel_f", "dx_rel_fr", "dx_rel_r",
    "dy_ml", "dy_rel_r", "dy_rel_rr", "vx_rel_f", "vx_rel_r", "vy_rel_f", "vy_rel_fr", "vy_rel_l",
    "vy_rel_r", "ax", "ax_rel_fr", "ay",
];

/// Column indices into a feature vector.
pub mod idx {
    pub const T_ML: usize = 0;
    pub const T_MR: usize = 1;
    pub const ACTV_FR: usize = 2;
    pub const ACTV_R: usize = 3;
    pub const ACTV_RR: usize = 4;
    pub const W_LANE: usize = 5;
    pub const DX_REL_F: usize = 6;
    pub const DX_REL_FR: usize = 7;
    pub const DX_REL_R: usize = 8;
    pub const DY_ML: usize = 9;
    pub const DY_REL_R: usize = 10;
    pub const DY_REL_RR: usize = 11;
    pub const VX_REL_F: usize = 12;
    pub const VX_REL_R: usize = 13;
    pub const VY_REL_F: usize = 14;
    pub const VY_REL_FR: usize = 15;
    pub const VY_REL_L: usize = 16;
    pub const VY_REL_R: usize = 17;
    pub const AX: usize = 18;
    pub const AX_REL_FR: usize = 19;
    pub const AY: usize = 20;
}

/// Longitudinal distance sentinel for a missing neighbor (+ ahead, − behind).
pub const MISSING_DISTANCE: f64 = 100.0;
/// Neighbors farther than this are treated as missing.
pub const SENSOR_RANGE: f64 = 100.0;
/// Half-length of the "alongside" zone in adjacent lanes.
pub const SIDE_ZONE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.0[i])
    }
}

#[derive(Default)]
struct Nearest<'a> {
    best: Option<(f64, &'a VehicleFrame)>,
}

impl<'a> Nearest<'a> {
    fn offer(&mut self, dist: f64, v: &'a VehicleFrame) {
        if self.best.is_none_or(|(d, _)| dist < d) {
            self.best = Some((dist, v));
        }
    }

    fn get(&self) -> Option<&'a VehicleFrame> {
        self.best.map(|(_, v)| v)
    }
}

/// Features of `vehicle_id` at `frame`.
pub fn extract_features(recording: &TrajectoryRecording, vehicle_id: u32, frame: i64) -> Result<FeatureVector> {
    let target = recording
        .trajectory(vehicle_id)
        .and_then(|t| t.at(frame))
        .ok_or_else(|| Error::data(format!("vehicle {vehicle_id} not present at frame {frame}")))?;
    features_for(recording, target)
}

pub(crate) fn features_for(recording: &TrajectoryRecording, target: &VehicleFrame) -> Result<FeatureVector> {
    let geometry = recording.geometry();
    let lane = geometry.lane(target.lane_id).ok_or_else(|| {
        Error::data(format!("vehicle {}: unknown lane {}", target.vehicle_id, target.lane_id))
    })?;
    let right_lane = geometry.right_of(lane.id).map(|l| l.id);
    let left_lane = geometry.left_of(lane.id).map(|l| l.id);

    let mut front = Nearest::default();
    let mut rear = Nearest::default();
    let mut front_right = Nearest::default();
    let mut right = Nearest::default();
    let mut rear_right = Nearest::default();
    let mut left = Nearest::default();

    for other in recording.vehicles_at(target.frame) {
        if other.vehicle_id == target.vehicle_id {
            continue;
        }
        let dx = other.x - target.x;
        if dx.abs() > SENSOR_RANGE {
            continue;
        }
        if other.lane_id == lane.id {
            if dx > 0.0 {
                front.offer(dx, other);
            } else {
                rear.offer(-dx, other);
            }
        } else if Some(other.lane_id) == right_lane {
            if dx.abs() <= SIDE_ZONE {
                right.offer(dx.abs(), other);
            } else if dx > 0.0 {
                front_right.offer(dx, other);
            } else {
                rear_right.offer(-dx, other);
            }
        } else if Some(other.lane_id) == left_lane && dx.abs() <= SIDE_ZONE {
            left.offer(dx.abs(), other);
        }
    }

    let flag = |n: &Nearest| if n.get().is_some() { 1.0 } else { 0.0 };
    let rel = |n: &Nearest, f: fn(&VehicleFrame) -> f64, missing: f64| {
        n.get().map_or(missing, |v| f(v) - f(target))
    };
    let x = |v: &VehicleFrame| v.x;
    let y = |v: &VehicleFrame| v.y;
    let vx = |v: &VehicleFrame| v.vx;
    let vy = |v: &VehicleFrame| v.vy;
    let ax = |v: &VehicleFrame| v.ax;

    let mut f = [0.0; NUM_FEATURES];
    f[idx::T_ML] = lane.left_marking.encode();
    f[idx::T_MR] = lane.right_marking.encode();
    f[idx::ACTV_FR] = flag(&front_right);
    f[idx::ACTV_R] = flag(&right);
    f[idx::ACTV_RR] = flag(&rear_right);
    f[idx::W_LANE] = lane.width();
    f[idx::DX_REL_F] = rel(&front, x, MISSING_DISTANCE);
    f[idx::DX_REL_FR] = rel(&front_right, x, MISSING_DISTANCE);
    f[idx::DX_REL_R] = rel(&rear, x, -MISSING_DISTANCE);
    f[idx::DY_ML] = target.y - lane.left_y;
    f[idx::DY_REL_R] = rel(&right, y, 0.0);
    f[idx::DY_REL_RR] = rel(&rear_right, y, 0.0);
    f[idx::VX_REL_F] = rel(&front, vx, 0.0);
    f[idx::VX_REL_R] = rel(&rear, vx, 0.0);
    f[idx::VY_REL_F] = rel(&front, vy, 0.0);
    f[idx::VY_REL_FR] = rel(&front_right, vy, 0.0);
    f[idx::VY_REL_L] = rel(&left, vy, 0.0);
    f[idx::VY_REL_R] = rel(&right, vy, 0.0);
    f[idx::AX] = target.ax;
    f[idx::AX_REL_FR] = rel(&front_right, ax, 0.0);
    f[idx::AY] = target.ay;
    Ok(FeatureVector(f))
}
