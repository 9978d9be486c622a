//! Recording ingestion, labelling, feature extraction and sample preparation.

mod cache;
mod features;
mod labels;
mod recording;
mod sampling;
mod scaler;
mod windows;

pub use cache::{Provenance, SampleCache, CACHE_FORMAT_VERSION};
pub use features::{
    extract_features, idx, FeatureVector, FEATURE_NAMES, MISSING_DISTANCE, SENSOR_RANGE, SIDE_ZONE,
};
pub use labels::{
    find_lane_crossings, label_maneuver, label_sample, maneuver_flags, Crossing, Direction, Maneuver,
};
pub use recording::{
    load_meta, load_recording, read_tracks, save_recording, write_tracks, Lane, LaneGeometry, MarkingType,
    RecordingMeta, RecordingPaths, Trajectory, TrajectoryRecording, VehicleFrame, TRACKS_HEADER,
};
pub use sampling::{assign_vehicle_folds, balance_by_maneuver, folds_from_assignment, split_folds, undersample_flw};
pub use scaler::{apply_scaler, fit_scaler, FeatureScaler, STD_FLOOR};
pub use windows::{build_windows, extract_series, FeatureSeries, Sample, SampleSet, VehicleKey};
