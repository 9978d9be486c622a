//! Synthetic highway traffic in the recording schema: IDM car following on a
//! straight multi-lane segment with randomly scheduled, smooth lane changes.
//! The planned crossing frames are returned as ground truth.

mod config;
mod profile;
mod sim;

pub use config::{IdmParams, ScenarioConfig, ScriptedLaneChange};
pub use profile::{lane_change as lane_change_profile, smoothstep};
pub use sim::{generate, lane_change_frames, load_truth, Scenario, TruthCrossing};
