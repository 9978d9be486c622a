use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{IdmParams, ScenarioConfig, ScriptedLaneChange};
use super::profile::{blend, lane_change, smoothstep};
use crate::dataset::{
    save_recording, Direction, LaneGeometry, RecordingMeta, RecordingPaths, TrajectoryRecording, VehicleFrame,
};
use crate::rng::{rng_from, TAG_SYNTH};
use crate::{Error, Result, FRAME_RATE};

const DT: f64 = 1.0 / FRAME_RATE;

/// Crossing the generator planned, in the same convention the detector uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TruthCrossing {
    pub vehicle_id: u32,
    pub frame: i64,
    pub direction: Direction,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub recording: TrajectoryRecording,
    /// Sorted by vehicle, then frame.
    pub truth: Vec<TruthCrossing>,
}

impl Scenario {
    /// Writes `NAME.csv`, `NAME.meta.json` and `NAME.truth.json` into `dir`.
    pub fn write(&self, dir: &Path, name: &str) -> Result<RecordingPaths> {
        std::fs::create_dir_all(dir)?;
        let paths = RecordingPaths::in_dir(dir, name);
        save_recording(&self.recording, &paths)?;
        std::fs::write(&paths.truth, serde_json::to_string_pretty(&self.truth)?)?;
        Ok(paths)
    }
}

pub fn load_truth(path: &Path) -> Result<Vec<TruthCrossing>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Number of frame intervals of a lane change lasting `seconds`, made odd so
/// that the profile midpoint, where the marking is passed, never falls on a
/// frame.
pub fn lane_change_frames(seconds: f64) -> usize {
    let n = (seconds * FRAME_RATE).round() as usize;
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

#[derive(Debug, Clone, Copy)]
enum Lateral {
    Keep,
    /// Slow drift toward the marking ahead of a lane change.
    Prep { start: i64, frames: usize, from: f64, to: f64, lc_frames: usize, target: usize },
    /// Drift back after a lane change was called off.
    Abort { start: i64, frames: usize, from: f64, to: f64 },
    Change { start: i64, frames: usize, from: f64, to: f64, target: usize },
    Settle { start: i64, frames: usize, from: f64, to: f64 },
}

struct Vehicle {
    id: u32,
    lane: usize,
    x: f64,
    v: f64,
    desired_speed: f64,
    offset: f64,
    y: f64,
    lateral: Lateral,
    rng: ChaCha8Rng,
    scripted: Vec<ScriptedLaneChange>,
    active: bool,
    frames: Vec<VehicleFrame>,
}

impl Vehicle {
    fn occupies(&self, lane: usize) -> bool {
        self.lane == lane || matches!(self.lateral, Lateral::Change { target, .. } if target == lane)
    }
}

/// Lateral position of a lane's path for a vehicle with `offset`.
fn lane_path(geometry: &LaneGeometry, lane: usize, offset: f64) -> f64 {
    geometry.lanes()[lane].center() + offset
}

/// Marking shared by `lane` and `target`.
fn marking_between(geometry: &LaneGeometry, lane: usize, target: usize) -> f64 {
    let lanes = geometry.lanes();
    if target < lane {
        lanes[lane].left_y
    } else {
        lanes[lane].right_y
    }
}

fn idm_accel(p: &IdmParams, v: f64, v0: f64, leader: Option<(f64, f64)>) -> f64 {
    let free = 1.0 - (v / v0).powf(p.exponent);
    let interaction = leader.map_or(0.0, |(gap, lv)| {
        let s_star = p.min_gap + v * p.headway + v * (v - lv) / (2.0 * (p.max_accel * p.comfort_decel).sqrt());
        let s = gap.max(0.1);
        (s_star.max(0.0) / s).powi(2)
    });
    (p.max_accel * (free - interaction)).clamp(-p.max_decel, p.max_accel)
}

/// Nearest vehicle ahead of `x` in `lane` as (gap, speed), skipping `skip`.
fn leader_in(vehicles: &[Vehicle], lane: usize, x: f64, skip: usize, len: f64) -> Option<(f64, f64)> {
    vehicles
        .iter()
        .enumerate()
        .filter(|&(j, o)| j != skip && o.active && o.occupies(lane) && o.x > x)
        .map(|(_, o)| (o.x - x - len, o.v))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

fn follower_in(vehicles: &[Vehicle], lane: usize, x: f64, skip: usize, len: f64) -> Option<(f64, f64)> {
    vehicles
        .iter()
        .enumerate()
        .filter(|&(j, o)| j != skip && o.active && o.occupies(lane) && o.x <= x)
        .map(|(_, o)| (x - o.x - len, o.v))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

fn gap_is_safe(vehicles: &[Vehicle], i: usize, target: usize, p: &IdmParams) -> bool {
    let me = &vehicles[i];
    let len = p.vehicle_length;
    let ahead_ok = leader_in(vehicles, target, me.x, i, len)
        .is_none_or(|(gap, _)| gap >= p.min_gap + 0.5 * p.headway * me.v);
    let behind_ok = follower_in(vehicles, target, me.x, i, len)
        .is_none_or(|(gap, fv)| gap >= p.min_gap + 0.5 * p.headway * fv);
    ahead_ok && behind_ok
}

fn frames_for(seconds: f64) -> usize {
    (seconds * FRAME_RATE).round() as usize
}

fn draw(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

/// Simulates the scenario and returns the recording plus the planned lane
/// crossings that fall inside each vehicle's recorded span.
pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let geometry = LaneGeometry::uniform(cfg.num_lanes, cfg.lane_width, 0.0)?;
    let p = cfg.idm;
    let n_frames = (cfg.duration * FRAME_RATE).round() as i64;
    let spacing = cfg.duration / cfg.num_vehicles as f64;
    let hazard = cfg.lane_change_rate / 60.0 * DT;

    let mut vehicles: Vec<Vehicle> = Vec::with_capacity(cfg.num_vehicles);
    let mut arrivals: Vec<(i64, usize)> = Vec::with_capacity(cfg.num_vehicles);
    for i in 0..cfg.num_vehicles {
        let id = i as u32 + 1;
        let mut rng = rng_from(cfg.seed, &[TAG_SYNTH, id as u64]);
        let jitter = if i == 0 { 0.0 } else { rng.random_range(0.0..0.5) * spacing };
        let lane = rng.random_range(0..cfg.num_lanes);
        let desired_speed = draw(&mut rng, cfg.speed_range);
        let offset = if cfg.lateral_offset > 0.0 {
            rng.random_range(-cfg.lateral_offset..cfg.lateral_offset)
        } else {
            0.0
        };
        let mut scripted: Vec<_> = cfg.scripted.iter().filter(|s| s.vehicle_id == id).copied().collect();
        scripted.sort_by(|a, b| a.time.total_cmp(&b.time));
        arrivals.push((((i as f64 * spacing + jitter) * FRAME_RATE).floor() as i64, i));
        vehicles.push(Vehicle {
            id,
            lane,
            x: 0.0,
            v: desired_speed,
            desired_speed,
            offset,
            y: lane_path(&geometry, lane, offset),
            lateral: Lateral::Keep,
            rng,
            scripted,
            active: false,
            frames: Vec::new(),
        });
    }
    let mut spawned = vec![false; cfg.num_vehicles];
    let mut planned: Vec<TruthCrossing> = Vec::new();

    for k in 0..=n_frames {
        // Longitudinal update from the previous frame's snapshot.
        let accel: Vec<f64> = (0..vehicles.len())
            .map(|i| {
                let me = &vehicles[i];
                if !me.active {
                    return 0.0;
                }
                let mut leader = leader_in(&vehicles, me.lane, me.x, i, p.vehicle_length);
                if let Lateral::Change { target, .. } = me.lateral {
                    let other = leader_in(&vehicles, target, me.x, i, p.vehicle_length);
                    leader = match (leader, other) {
                        (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
                        (a, b) => a.or(b),
                    };
                }
                idm_accel(&p, me.v, me.desired_speed, leader)
            })
            .collect();
        for (veh, a) in vehicles.iter_mut().zip(&accel) {
            if veh.active {
                veh.v = (veh.v + a * DT).max(0.0);
                veh.x += veh.v * DT;
            }
        }

        // Lateral state machine.
        for i in 0..vehicles.len() {
            if !vehicles[i].active {
                continue;
            }
            advance_lateral(&mut vehicles, i, k, cfg, &geometry, hazard, &mut planned);
        }

        // Spawns at the road entry.
        for &(arrival, i) in &arrivals {
            if spawned[i] || arrival > k {
                continue;
            }
            let lane = vehicles[i].lane;
            let ahead = leader_in(&vehicles, lane, -1.0, i, 0.0);
            let v_init = ahead.map_or(vehicles[i].desired_speed, |(_, lv)| lv.min(vehicles[i].desired_speed));
            let gap_ok = ahead.is_none_or(|(gap, _)| gap - 1.0 - p.vehicle_length >= p.min_gap + p.headway * v_init);
            if gap_ok {
                let veh = &mut vehicles[i];
                veh.v = v_init;
                veh.active = true;
                spawned[i] = true;
                veh.x = 0.0;
                veh.y = lane_path(&geometry, lane, veh.offset);
            }
        }

        // Emit, retiring vehicles that left the segment.
        for veh in vehicles.iter_mut().filter(|v| v.active) {
            if veh.x > cfg.road_length {
                veh.active = false;
                continue;
            }
            let lane_id = geometry
                .lane_at(veh.y)
                .ok_or_else(|| Error::Pipeline(format!("vehicle {} left the carriageway", veh.id)))?
                .id;
            let frame = match veh.frames.last() {
                Some(prev) => {
                    let vx = (veh.x - prev.x) / DT;
                    let vy = (veh.y - prev.y) / DT;
                    VehicleFrame {
                        frame: k,
                        vehicle_id: veh.id,
                        x: veh.x,
                        y: veh.y,
                        vx,
                        vy,
                        ax: (vx - prev.vx) / DT,
                        ay: (vy - prev.vy) / DT,
                        lane_id,
                    }
                }
                None => VehicleFrame {
                    frame: k,
                    vehicle_id: veh.id,
                    x: veh.x,
                    y: veh.y,
                    vx: veh.v,
                    vy: 0.0,
                    ax: 0.0,
                    ay: 0.0,
                    lane_id,
                },
            };
            veh.frames.push(frame);
        }
    }

    let mut truth: Vec<TruthCrossing> = planned
        .into_iter()
        .filter(|c| {
            let frames = &vehicles[c.vehicle_id as usize - 1].frames;
            frames.first().is_some_and(|f| f.frame < c.frame) && frames.last().is_some_and(|f| f.frame >= c.frame)
        })
        .collect();
    truth.sort();
    let frames: Vec<VehicleFrame> = vehicles.into_iter().flat_map(|v| v.frames).collect();
    let meta = RecordingMeta { frame_rate: FRAME_RATE, lanes: geometry };
    Ok(Scenario { recording: TrajectoryRecording::from_frames(meta, frames)?, truth })
}

fn start_change(veh: &mut Vehicle, k: i64, frames: usize, target: usize, geometry: &LaneGeometry, planned: &mut Vec<TruthCrossing>) {
    let m = marking_between(geometry, veh.lane, target);
    let from = veh.y;
    let direction = if target < veh.lane { Direction::Left } else { Direction::Right };
    veh.lateral = Lateral::Change { start: k, frames, from, to: 2.0 * m - from, target };
    planned.push(TruthCrossing { vehicle_id: veh.id, frame: k + (frames as i64 + 1) / 2, direction });
}

fn advance_lateral(
    vehicles: &mut [Vehicle],
    i: usize,
    k: i64,
    cfg: &ScenarioConfig,
    geometry: &LaneGeometry,
    hazard: f64,
    planned: &mut Vec<TruthCrossing>,
) {
    let n_lanes = cfg.num_lanes;
    // Resolve finished phases; a phase ending at `k` hands over at `k`.
    loop {
        let state = vehicles[i].lateral;
        match state {
            Lateral::Prep { start, frames, lc_frames, target, .. } if k - start >= frames as i64 => {
                if gap_is_safe(vehicles, i, target, &cfg.idm) {
                    start_change(&mut vehicles[i], k, lc_frames, target, geometry, planned);
                } else {
                    let veh = &mut vehicles[i];
                    let to = lane_path(geometry, veh.lane, veh.offset);
                    veh.lateral = Lateral::Abort { start: k, frames, from: veh.y, to };
                }
            }
            Lateral::Change { start, frames, to, target, .. } if k - start >= frames as i64 => {
                let veh = &mut vehicles[i];
                veh.lane = target;
                let path = lane_path(geometry, target, veh.offset);
                veh.lateral = Lateral::Settle { start: k, frames: frames_for(cfg.settle_duration), from: to, to: path };
            }
            Lateral::Settle { start, frames, .. } | Lateral::Abort { start, frames, .. }
                if k - start >= frames as i64 =>
            {
                vehicles[i].lateral = Lateral::Keep;
            }
            _ => break,
        }
    }

    let veh = &mut vehicles[i];
    if matches!(veh.lateral, Lateral::Keep) {
        let due = veh.scripted.first().is_some_and(|s| (s.time * FRAME_RATE).round() as i64 <= k);
        if due {
            let s = veh.scripted.remove(0);
            let target = match s.direction {
                Direction::Left => veh.lane.checked_sub(1),
                Direction::Right => Some(veh.lane + 1).filter(|&t| t < n_lanes),
            };
            if let Some(target) = target {
                start_change(veh, k, lane_change_frames(s.duration), target, geometry, planned);
            }
        } else if veh.rng.random::<f64>() < hazard {
            let mut options = Vec::with_capacity(2);
            if veh.lane > 0 {
                options.push(veh.lane - 1);
            }
            if veh.lane + 1 < n_lanes {
                options.push(veh.lane + 1);
            }
            if !options.is_empty() {
                let target = options[veh.rng.random_range(0..options.len())];
                let lc_frames = lane_change_frames(draw(&mut veh.rng, cfg.lc_duration));
                let prep_frames = frames_for(draw(&mut veh.rng, cfg.prep_duration));
                let drift = draw(&mut veh.rng, cfg.prep_offset);
                if gap_is_safe(vehicles, i, target, &cfg.idm) {
                    let veh = &mut vehicles[i];
                    if prep_frames == 0 {
                        start_change(veh, k, lc_frames, target, geometry, planned);
                    } else {
                        let sign = if target < veh.lane { -1.0 } else { 1.0 };
                        veh.lateral = Lateral::Prep {
                            start: k,
                            frames: prep_frames,
                            from: veh.y,
                            to: veh.y + sign * drift,
                            lc_frames,
                            target,
                        };
                    }
                }
            }
        }
    }

    let veh = &mut vehicles[i];
    veh.y = match veh.lateral {
        Lateral::Keep => lane_path(geometry, veh.lane, veh.offset),
        Lateral::Prep { start, frames, from, to, .. }
        | Lateral::Abort { start, frames, from, to }
        | Lateral::Settle { start, frames, from, to } => blend(smoothstep, from, to, (k - start) as usize, frames),
        Lateral::Change { start, frames, from, to, .. } => blend(lane_change, from, to, (k - start) as usize, frames),
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_frame_counts() {
        assert_eq!(lane_change_frames(4.0), 101);
        assert_eq!(lane_change_frames(3.0), 75);
        assert_eq!(lane_change_frames(5.0), 125);
        assert_eq!(lane_change_frames(3.02), 77);
    }

    #[test]
    fn idm_free_road_and_braking() {
        let p = IdmParams::default();
        assert!((idm_accel(&p, 0.0, 30.0, None) - 1.5).abs() < 1e-12);
        assert!(idm_accel(&p, 30.0, 30.0, None).abs() < 1e-12);
        assert_eq!(idm_accel(&p, 30.0, 30.0, Some((1.0, 0.0))), -9.0);
    }
}
