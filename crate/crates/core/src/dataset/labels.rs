use serde::{Deserialize, Serialize};

use super::recording::{LaneGeometry, Trajectory};
use crate::{FRAME_RATE, MAX_TTLC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Toward decreasing y.
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crossing {
    pub frame: i64,
    pub direction: Direction,
}

/// Frames at which the vehicle center ends up on the other side of a lane
/// marking than in the previous frame. A center exactly on a marking counts
/// as being on its right side.
pub fn find_lane_crossings(traj: &Trajectory, geometry: &LaneGeometry) -> Vec<Crossing> {
    let markings = geometry.inner_markings();
    let mut out = Vec::new();
    for w in traj.frames.windows(2) {
        let (prev, cur) = (w[0].y, w[1].y);
        for &m in &markings {
            let was_right = prev >= m;
            let is_right = cur >= m;
            if was_right != is_right {
                let direction = if is_right { Direction::Right } else { Direction::Left };
                out.push(Crossing { frame: w[1].frame, direction });
            }
        }
    }
    out
}

/// `(TTLCL, TTLCR)` at `frame`: seconds until the next crossing in each
/// direction (a crossing at `frame` itself counts as 0), clipped to 7 s.
pub fn label_sample(frame: i64, crossings: &[Crossing]) -> (f64, f64) {
    let next = |dir: Direction| {
        crossings
            .iter()
            .filter(|c| c.direction == dir && c.frame >= frame)
            .map(|c| c.frame - frame)
            .min()
            .map_or(MAX_TTLC, |d| (d as f64 / FRAME_RATE).min(MAX_TTLC))
    };
    (next(Direction::Left), next(Direction::Right))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Maneuver {
    #[serde(rename = "LCL")]
    Lcl,
    #[serde(rename = "FLW")]
    Flw,
    #[serde(rename = "LCR")]
    Lcr,
}

impl Maneuver {
    /// Table column order.
    pub const ALL: [Maneuver; 3] = [Maneuver::Lcl, Maneuver::Flw, Maneuver::Lcr];

    pub fn index(self) -> usize {
        match self {
            Maneuver::Lcl => 0,
            Maneuver::Flw => 1,
            Maneuver::Lcr => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Maneuver::Lcl => "LCL",
            Maneuver::Flw => "FLW",
            Maneuver::Lcr => "LCR",
        }
    }
}

impl std::fmt::Display for Maneuver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Membership of a sample in the LCL and LCR pools; a sample may be in both.
pub fn maneuver_flags(ttlcl: f64, ttlcr: f64, horizon: f64) -> (bool, bool) {
    (ttlcl < horizon, ttlcr < horizon)
}

/// Single maneuver label from true TTLCs. When both directions fall inside
/// the horizon the smaller TTLC wins, ties going to LCL.
pub fn label_maneuver(ttlcl: f64, ttlcr: f64, horizon: f64) -> Maneuver {
    match maneuver_flags(ttlcl, ttlcr, horizon) {
        (true, true) if ttlcr < ttlcl => Maneuver::Lcr,
        (true, _) => Maneuver::Lcl,
        (false, true) => Maneuver::Lcr,
        (false, false) => Maneuver::Flw,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::recording::VehicleFrame;

    fn traj(ys: &[f64], start: i64) -> Trajectory {
        let frames = ys
            .iter()
            .enumerate()
            .map(|(k, &y)| VehicleFrame {
                frame: start + k as i64,
                vehicle_id: 1,
                x: k as f64,
                y,
                vx: 25.0,
                vy: 0.0,
                ax: 0.0,
                ay: 0.0,
                lane_id: 2,
            })
            .collect();
        Trajectory { vehicle_id: 1, frames }
    }

    fn geometry() -> LaneGeometry {
        LaneGeometry::uniform(3, 4.0, 0.0).unwrap()
    }

    #[test]
    fn lane_keeping_has_no_crossings() {
        let ys: Vec<f64> = (0..200).map(|k| 6.0 + 0.3 * (k as f64 * 0.1).sin()).collect();
        assert!(find_lane_crossings(&traj(&ys, 0), &geometry()).is_empty());
    }

    #[test]
    fn crossing_between_99_and_100_is_left_at_100() {
        let ys: Vec<f64> = (0..150).map(|k| if k < 100 { 4.02 } else { 3.98 }).collect();
        assert_eq!(
            find_lane_crossings(&traj(&ys, 0), &geometry()),
            vec![Crossing { frame: 100, direction: Direction::Left }]
        );
    }

    #[test]
    fn left_then_right_in_frame_order() {
        let ys: Vec<f64> = (0..60)
            .map(|k| match k {
                0..=19 => 6.0,
                20..=39 => 2.0,
                _ => 6.0,
            })
            .collect();
        let c = find_lane_crossings(&traj(&ys, 10), &geometry());
        assert_eq!(
            c,
            vec![
                Crossing { frame: 30, direction: Direction::Left },
                Crossing { frame: 50, direction: Direction::Right }
            ]
        );
    }

    #[test]
    fn labels_from_crossings() {
        assert_eq!(label_sample(10, &[]), (7.0, 7.0));
        let left = [Crossing { frame: 175, direction: Direction::Left }];
        assert_eq!(label_sample(100, &left), (3.0, 7.0));
        let both = [
            Crossing { frame: 150, direction: Direction::Left },
            Crossing { frame: 130, direction: Direction::Right },
        ];
        assert_eq!(label_sample(100, &both), (2.0, 1.2));
        // Past crossings are ignored; far ones are clipped.
        assert_eq!(label_sample(151, &both), (7.0, 7.0));
        let far = [Crossing { frame: 1000, direction: Direction::Right }];
        assert_eq!(label_sample(0, &far), (7.0, 7.0));
        assert_eq!(label_sample(150, &both).0, 0.0);
    }

    #[test]
    fn maneuver_labels() {
        assert_eq!(label_maneuver(7.0, 7.0, 7.0), Maneuver::Flw);
        assert_eq!(label_maneuver(3.0, 7.0, 5.0), Maneuver::Lcl);
        assert_eq!(label_maneuver(6.0, 7.0, 5.0), Maneuver::Flw);
        assert_eq!(label_maneuver(7.0, 1.0, 5.0), Maneuver::Lcr);
        assert_eq!(label_maneuver(2.0, 1.0, 5.0), Maneuver::Lcr);
        assert_eq!(label_maneuver(1.0, 1.0, 5.0), Maneuver::Lcl);
        assert_eq!(maneuver_flags(2.0, 1.0, 7.0), (true, true));
    }
}
