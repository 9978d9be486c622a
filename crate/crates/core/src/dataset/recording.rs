//! highD-schema recordings: a tracks CSV plus a companion metadata JSON.
//!
//! Coordinates are road-aligned: vehicles travel toward +x, and y grows
//! toward the right road edge, so "left" always means decreasing y.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, FRAME_RATE};

pub const TRACKS_HEADER: [&str; 9] = [
    "frame",
    "id",
    "x",
    "y",
    "xVelocity",
    "yVelocity",
    "xAcceleration",
    "yAcceleration",
    "laneId",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleFrame {
    pub frame: i64,
    #[serde(rename = "id")]
    pub vehicle_id: u32,
    pub x: f64,
    pub y: f64,
    #[serde(rename = "xVelocity")]
    pub vx: f64,
    #[serde(rename = "yVelocity")]
    pub vy: f64,
    #[serde(rename = "xAcceleration")]
    pub ax: f64,
    #[serde(rename = "yAcceleration")]
    pub ay: f64,
    #[serde(rename = "laneId")]
    pub lane_id: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkingType {
    Dashed,
    Solid,
}

impl MarkingType {
    /// Binary feature encoding: dashed = 0, solid = 1.
    pub fn encode(self) -> f64 {
        match self {
            MarkingType::Dashed => 0.0,
            MarkingType::Solid => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: i32,
    pub left_y: f64,
    pub right_y: f64,
    pub left_marking: MarkingType,
    pub right_marking: MarkingType,
}

impl Lane {
    pub fn width(&self) -> f64 {
        self.right_y - self.left_y
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.left_y + self.right_y)
    }
}

const ADJACENT_TOL: f64 = 1e-6;

/// Lanes ordered from left (smallest y) to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Lane>", into = "Vec<Lane>")]
pub struct LaneGeometry {
    lanes: Vec<Lane>,
}

impl TryFrom<Vec<Lane>> for LaneGeometry {
    type Error = Error;

    fn try_from(lanes: Vec<Lane>) -> Result<Self> {
        Self::new(lanes)
    }
}

impl From<LaneGeometry> for Vec<Lane> {
    fn from(g: LaneGeometry) -> Self {
        g.lanes
    }
}

impl LaneGeometry {
    pub fn new(mut lanes: Vec<Lane>) -> Result<Self> {
        for l in &lanes {
            if !(l.width() > 0.0) || !l.left_y.is_finite() || !l.right_y.is_finite() {
                return Err(Error::data(format!("lane {} has non-positive width", l.id)));
            }
        }
        lanes.sort_by(|a, b| a.left_y.total_cmp(&b.left_y));
        for w in lanes.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::data(format!("duplicate lane id {}", w[0].id)));
            }
            if w[1].left_y < w[0].right_y - ADJACENT_TOL {
                return Err(Error::data(format!("lanes {} and {} overlap", w[0].id, w[1].id)));
            }
        }
        let mut ids: Vec<i32> = lanes.iter().map(|l| l.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != lanes.len() {
            return Err(Error::data("duplicate lane ids"));
        }
        Ok(Self { lanes })
    }

    /// Evenly spaced lanes with ids 1..=n from left to right; outer edges solid.
    pub fn uniform(num_lanes: usize, lane_width: f64, left_edge_y: f64) -> Result<Self> {
        let lanes = (0..num_lanes)
            .map(|i| Lane {
                id: i as i32 + 1,
                left_y: left_edge_y + i as f64 * lane_width,
                right_y: left_edge_y + (i + 1) as f64 * lane_width,
                left_marking: if i == 0 { MarkingType::Solid } else { MarkingType::Dashed },
                right_marking: if i + 1 == num_lanes { MarkingType::Solid } else { MarkingType::Dashed },
            })
            .collect();
        Self::new(lanes)
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    fn index_of(&self, id: i32) -> Option<usize> {
        self.lanes.iter().position(|l| l.id == id)
    }

    pub fn lane(&self, id: i32) -> Option<&Lane> {
        self.index_of(id).map(|i| &self.lanes[i])
    }

    pub fn left_of(&self, id: i32) -> Option<&Lane> {
        let i = self.index_of(id)?;
        let lane = &self.lanes[i];
        i.checked_sub(1)
            .map(|j| &self.lanes[j])
            .filter(|l| (l.right_y - lane.left_y).abs() <= ADJACENT_TOL)
    }

    pub fn right_of(&self, id: i32) -> Option<&Lane> {
        let i = self.index_of(id)?;
        let lane = &self.lanes[i];
        self.lanes
            .get(i + 1)
            .filter(|l| (l.left_y - lane.right_y).abs() <= ADJACENT_TOL)
    }

    /// y positions of markings shared by two adjacent lanes.
    pub fn inner_markings(&self) -> Vec<f64> {
        self.lanes
            .windows(2)
            .filter(|w| (w[1].left_y - w[0].right_y).abs() <= ADJACENT_TOL)
            .map(|w| w[0].right_y)
            .collect()
    }

    /// Lane containing `y`; each lane covers `[left_y, right_y)`.
    pub fn lane_at(&self, y: f64) -> Option<&Lane> {
        self.lanes.iter().find(|l| y >= l.left_y && y < l.right_y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub frame_rate: f64,
    pub lanes: LaneGeometry,
}

/// Frames of one vehicle, consecutive and sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub vehicle_id: u32,
    pub frames: Vec<VehicleFrame>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn first_frame(&self) -> i64 {
        self.frames[0].frame
    }

    pub fn last_frame(&self) -> i64 {
        self.frames[self.frames.len() - 1].frame
    }

    pub fn at(&self, frame: i64) -> Option<&VehicleFrame> {
        let idx = frame.checked_sub(self.frames.first()?.frame)?;
        usize::try_from(idx).ok().and_then(|i| self.frames.get(i))
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecording {
    pub meta: RecordingMeta,
    trajectories: Vec<Trajectory>,
    /// frame → indices into `trajectories` of the vehicles present.
    frame_index: BTreeMap<i64, Vec<usize>>,
}

impl TrajectoryRecording {
    /// Groups frames by vehicle, sorts them and checks continuity.
    pub fn from_frames(meta: RecordingMeta, frames: Vec<VehicleFrame>) -> Result<Self> {
        if (meta.frame_rate - FRAME_RATE).abs() > 1e-9 {
            return Err(Error::data(format!(
                "frame rate must be {FRAME_RATE} Hz, found {}",
                meta.frame_rate
            )));
        }
        let mut by_vehicle: BTreeMap<u32, Vec<VehicleFrame>> = BTreeMap::new();
        for f in frames {
            by_vehicle.entry(f.vehicle_id).or_default().push(f);
        }
        let mut trajectories = Vec::with_capacity(by_vehicle.len());
        for (id, mut frames) in by_vehicle {
            frames.sort_by_key(|f| f.frame);
            for w in frames.windows(2) {
                if w[1].frame != w[0].frame + 1 {
                    return Err(Error::data(format!(
                        "vehicle {id}: frames not consecutive ({} followed by {})",
                        w[0].frame, w[1].frame
                    )));
                }
            }
            for f in &frames {
                if meta.lanes.lane(f.lane_id).is_none() {
                    return Err(Error::data(format!(
                        "vehicle {id}: unknown lane {} at frame {}",
                        f.lane_id, f.frame
                    )));
                }
                let vals = [f.x, f.y, f.vx, f.vy, f.ax, f.ay];
                if !vals.iter().all(|v| v.is_finite()) {
                    return Err(Error::data(format!("vehicle {id}: non-finite state at frame {}", f.frame)));
                }
            }
            trajectories.push(Trajectory { vehicle_id: id, frames });
        }
        let mut frame_index: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (i, t) in trajectories.iter().enumerate() {
            for f in &t.frames {
                frame_index.entry(f.frame).or_default().push(i);
            }
        }
        Ok(Self { meta, trajectories, frame_index })
    }

    pub fn geometry(&self) -> &LaneGeometry {
        &self.meta.lanes
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn trajectory(&self, vehicle_id: u32) -> Option<&Trajectory> {
        self.trajectories
            .binary_search_by_key(&vehicle_id, |t| t.vehicle_id)
            .ok()
            .map(|i| &self.trajectories[i])
    }

    /// States of every vehicle present at `frame`.
    pub fn vehicles_at(&self, frame: i64) -> impl Iterator<Item = &VehicleFrame> + '_ {
        self.frame_index
            .get(&frame)
            .into_iter()
            .flatten()
            .filter_map(move |&i| self.trajectories[i].at(frame))
    }

    pub fn num_frames(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }
}

/// File locations of one recording, derived from the tracks CSV path:
/// `NAME.csv`, `NAME.meta.json`, `NAME.truth.json`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordingPaths {
    pub tracks: PathBuf,
    pub meta: PathBuf,
    pub truth: PathBuf,
}

impl RecordingPaths {
    pub fn from_tracks(tracks: &Path) -> Self {
        let stem = tracks.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let dir = tracks.parent().unwrap_or_else(|| Path::new(""));
        Self {
            tracks: tracks.to_path_buf(),
            meta: dir.join(format!("{stem}.meta.json")),
            truth: dir.join(format!("{stem}.truth.json")),
        }
    }

    pub fn in_dir(dir: &Path, name: &str) -> Self {
        Self::from_tracks(&dir.join(format!("{name}.csv")))
    }
}

pub fn load_meta(path: &Path) -> Result<RecordingMeta> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

pub fn read_tracks<R: std::io::Read>(reader: R) -> Result<Vec<VehicleFrame>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if headers.iter().ne(TRACKS_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{}'", TRACKS_HEADER.join(",")),
        });
    }
    let mut frames = Vec::new();
    for row in rdr.deserialize::<VehicleFrame>() {
        let f = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        frames.push(f);
    }
    Ok(frames)
}

/// Reads `NAME.csv` and its `NAME.meta.json` companion.
pub fn load_recording(tracks: &Path) -> Result<TrajectoryRecording> {
    let paths = RecordingPaths::from_tracks(tracks);
    let meta = load_meta(&paths.meta)?;
    let frames = read_tracks(std::fs::File::open(&paths.tracks)?)?;
    TrajectoryRecording::from_frames(meta, frames)
}

/// Writes the tracks CSV, rows sorted by (id, frame), floats in shortest
/// round-trip form so a reload is exact.
pub fn write_tracks<W: Write>(recording: &TrajectoryRecording, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACKS_HEADER)?;
    for t in recording.trajectories() {
        for f in &t.frames {
            w.serialize(f)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_recording(recording: &TrajectoryRecording, paths: &RecordingPaths) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(&paths.tracks)?);
    write_tracks(recording, file)?;
    std::fs::write(&paths.meta, serde_json::to_string_pretty(&recording.meta)?)?;
    Ok(())
}
