use serde::{Deserialize, Serialize};

use crate::dataset::Direction;
use crate::{Error, Result};

/// Car-following parameters of the intelligent driver model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    /// Minimum gap in m.
    pub min_gap: f64,
    /// Time headway in s.
    pub headway: f64,
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub exponent: f64,
    /// Hard braking limit in m/s².
    pub max_decel: f64,
    pub vehicle_length: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            min_gap: 2.0,
            headway: 1.5,
            max_accel: 1.5,
            comfort_decel: 2.0,
            exponent: 4.0,
            max_decel: 9.0,
            vehicle_length: 4.5,
        }
    }
}

/// A lane change forced at an absolute time, bypassing the random schedule
/// and the gap check. It has no preparation drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedLaneChange {
    pub vehicle_id: u32,
    /// Start of the lateral movement in s.
    pub time: f64,
    pub duration: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub num_vehicles: usize,
    pub num_lanes: usize,
    pub lane_width: f64,
    /// Recording length in s.
    pub duration: f64,
    /// Expected lane changes per vehicle and minute.
    pub lane_change_rate: f64,
    /// Range of the lateral movement duration in s.
    pub lc_duration: [f64; 2],
    /// Range of the slow drift toward the marking before a lane change, s.
    pub prep_duration: [f64; 2],
    /// Range of the drift distance in m.
    pub prep_offset: [f64; 2],
    /// Time to settle onto the new lane's path after a lane change, s.
    pub settle_duration: f64,
    /// Maximum constant lateral offset from the lane center, m.
    pub lateral_offset: f64,
    /// Desired speed range in m/s.
    pub speed_range: [f64; 2],
    pub road_length: f64,
    pub idm: IdmParams,
    pub scripted: Vec<ScriptedLaneChange>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_vehicles: 200,
            num_lanes: 3,
            lane_width: 3.75,
            duration: 600.0,
            lane_change_rate: 3.0,
            lc_duration: [3.0, 5.0],
            prep_duration: [1.5, 3.0],
            prep_offset: [0.3, 0.6],
            settle_duration: 1.5,
            lateral_offset: 0.25,
            speed_range: [22.0, 36.0],
            road_length: 420.0,
            idm: IdmParams::default(),
            scripted: Vec::new(),
            seed: 0,
        }
    }
}

fn range_ok(r: [f64; 2]) -> bool {
    r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.num_vehicles == 0 || self.num_lanes == 0 {
            return err("need at least one vehicle and one lane".into());
        }
        if !(self.lane_width > 0.0 && self.duration > 0.0 && self.road_length > 0.0) {
            return err("lane width, duration and road length must be positive".into());
        }
        if !(self.lane_change_rate >= 0.0 && self.lane_change_rate.is_finite()) {
            return err(format!("invalid lane change rate {}", self.lane_change_rate));
        }
        if !range_ok(self.lc_duration) || self.lc_duration[0] < 3.0 || self.lc_duration[1] > 5.0 {
            return err(format!("lane change duration {:?} must lie within [3, 5] s", self.lc_duration));
        }
        if !range_ok(self.prep_duration) || self.prep_duration[0] < 0.0 {
            return err(format!("invalid preparation duration {:?}", self.prep_duration));
        }
        if !range_ok(self.prep_offset) || self.prep_offset[0] < 0.0 {
            return err(format!("invalid preparation offset {:?}", self.prep_offset));
        }
        if self.lateral_offset < 0.0 || self.lateral_offset + self.prep_offset[1] >= 0.45 * self.lane_width {
            return err("lateral offsets leave too little room inside the lane".into());
        }
        if !(self.settle_duration >= 0.0) {
            return err("settle duration must be non-negative".into());
        }
        if !range_ok(self.speed_range) || self.speed_range[0] <= 0.0 {
            return err(format!("invalid speed range {:?}", self.speed_range));
        }
        for s in &self.scripted {
            if s.vehicle_id == 0 || s.vehicle_id as usize > self.num_vehicles {
                return err(format!("scripted lane change for unknown vehicle {}", s.vehicle_id));
            }
            if !(3.0..=5.0).contains(&s.duration) || !(s.time >= 0.0) {
                return err(format!("scripted lane change of vehicle {} is out of range", s.vehicle_id));
            }
        }
        // Arrivals per lane must not outpace the jam headway at the lowest speed.
        let idm = &self.idm;
        let arrival_headway = self.duration * self.num_lanes as f64 / self.num_vehicles as f64;
        let jam_headway = idm.headway + (idm.min_gap + idm.vehicle_length) / self.speed_range[0];
        if self.num_vehicles > self.num_lanes && arrival_headway < jam_headway {
            return err(format!(
                "infeasible density: {:.2} s between arrivals per lane, at least {:.2} s needed",
                arrival_headway, jam_headway
            ));
        }
        Ok(())
    }
}
