//! Deterministic synthetic-trial generator: two-camera pose logs,
//! annotations, and ground-truth metric values.
//!
//! Human-cohort results are not reproducible at desk scale, so this module
//! substitutes controlled truth: tip paths follow the configured motion
//! profile exactly, camera observations are derived by inverting the
//! transform chain and then corrupted with Gaussian noise and burst
//! dropout, and every metric's ground truth is computed from the
//! uncorrupted profile. Identical seeds give byte-identical artifacts.

mod generate;
mod path;
mod presets;
mod write;

pub use generate::{
    ordered_pair, simulate_trial, synth_pivot_samples, synth_two_camera_scene, SceneConfig,
    SceneData, SimulatedTrial,
};
pub use presets::{cohort_47x3, default_trial, null_cohort, CohortTrial};
pub use write::{read_ground_truth, write_ground_truth, write_trial};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Side;
use crate::io::{write_atomic, IoError, SCHEMA};
use crate::metrics::{BimanualMetrics, MotionMetrics, TimeMetrics};
use crate::pose::RigidTransform;
use crate::sync::Instrument;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// A rigid pose in config form: rotation quaternion (w, x, y, z) plus
/// translation in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSpec {
    pub rotation_wxyz: [f64; 4],
    pub translation_mm: [f64; 3],
}

impl PoseSpec {
    pub fn identity() -> Self {
        PoseSpec {
            rotation_wxyz: [1.0, 0.0, 0.0, 0.0],
            translation_mm: [0.0, 0.0, 0.0],
        }
    }

    pub fn new(t: &RigidTransform) -> Self {
        let q = t.rotation.quaternion();
        PoseSpec {
            rotation_wxyz: [q.w, q.i, q.j, q.k],
            translation_mm: t.translation.into(),
        }
    }

    pub fn to_transform(self) -> RigidTransform {
        let [w, x, y, z] = self.rotation_wxyz;
        RigidTransform::from_parts(w, x, y, z, nalgebra::Vector3::from(self.translation_mm))
    }
}

/// One piece of a tip motion profile. Segments execute in order from the
/// instrument's start position; the tip holds its final position afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathSegment {
    Hold {
        duration_s: f64,
    },
    Line {
        to_mm: [f64; 3],
        speed_mm_s: f64,
    },
    /// Circular arc about `center_mm` in the plane orthogonal to `normal`,
    /// entered at the current position and swept at constant speed.
    Arc {
        center_mm: [f64; 3],
        normal: [f64; 3],
        sweep_deg: f64,
        speed_mm_s: f64,
    },
}

/// Motion profile, usage schedule, and geometry for one instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentProfile {
    pub name: Instrument,
    pub side: Side,
    pub tip_offset_mm: [f64; 3],
    pub start_mm: [f64; 3],
    /// Usage windows on the video timeline, seconds.
    pub usage_video_s: Vec<[f64; 2]>,
    pub segments: Vec<PathSegment>,
    /// Slow body-orientation wobble so rotations are exercised:
    /// angle(t) = amplitude * sin(2 pi rate t) about `spin_axis`.
    pub spin_axis: [f64; 3],
    pub spin_amplitude_rad: f64,
    pub spin_rate_hz: f64,
}

/// Full synthetic-trial configuration. Persisted as a versioned TOML
/// document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub tracker_rate_hz: f64,
    pub noise_sigma_mm: f64,
    /// Long-run fraction of tool frames lost to occlusion bursts.
    pub dropout_rate: f64,
    pub dropout_burst_ms: f64,
    /// Dropout is suppressed before this time so the sync gesture stays
    /// observable; the gesture is performed deliberately in clear view.
    pub dropout_protect_until_s: f64,
    /// Camera poses in the global frame.
    pub right_camera: PoseSpec,
    pub left_camera: PoseSpec,
    /// Left-reference pose in the global frame; the reference-calibration
    /// ground truth.
    pub left_ref: PoseSpec,
    pub video_contact_mark_s: f64,
    /// Where the contact gesture lands on the tracking timeline; the true
    /// sync offset is this minus the video mark.
    pub contact_time_tracking_s: f64,
    /// Analysis parameters the ground truth is computed with; analyze must
    /// run with the same values for oracle closure.
    pub smooth_window: usize,
    pub gap_threshold_ms: f64,
    pub instruments: Vec<InstrumentProfile>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if !(self.duration_s > 0.0) {
            return bad("duration_s must be positive".into());
        }
        if !(self.tracker_rate_hz > 0.0) {
            return bad("tracker_rate_hz must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)".into());
        }
        if self.dropout_rate > 0.0 && !(self.dropout_burst_ms > 0.0) {
            return bad("dropout_burst_ms must be positive".into());
        }
        if self.noise_sigma_mm < 0.0 {
            return bad("noise_sigma_mm must be non-negative".into());
        }
        if self.smooth_window == 0 || self.smooth_window % 2 == 0 {
            return bad("smooth_window must be odd and positive".into());
        }
        if self.instruments.is_empty() {
            return bad("at least one instrument is required".into());
        }
        let mut seen = Vec::new();
        for inst in &self.instruments {
            if seen.contains(&inst.name) {
                return bad(format!("duplicate instrument {}", inst.name));
            }
            seen.push(inst.name);
            for w in &inst.usage_video_s {
                if !(w[0] < w[1]) {
                    return bad(format!("{}: usage window start must precede end", inst.name));
                }
                let offset = self.contact_time_tracking_s - self.video_contact_mark_s;
                if w[0] + offset < 0.0 || w[1] + offset > self.duration_s {
                    return bad(format!(
                        "{}: usage window [{}, {}] leaves [0, {}] on the tracking timeline",
                        inst.name, w[0], w[1], self.duration_s
                    ));
                }
            }
            for seg in &inst.segments {
                let speed = match seg {
                    PathSegment::Hold { duration_s } => {
                        if *duration_s < 0.0 {
                            return bad("hold duration must be non-negative".into());
                        }
                        continue;
                    }
                    PathSegment::Line { speed_mm_s, .. } => *speed_mm_s,
                    PathSegment::Arc { speed_mm_s, .. } => *speed_mm_s,
                };
                if !(speed > 0.0) {
                    return bad("segment speeds must be positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn true_sync_offset_s(&self) -> f64 {
        self.contact_time_tracking_s - self.video_contact_mark_s
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SimConfigDoc {
    schema: String,
    kind: String,
    #[serde(flatten)]
    config: SimConfig,
}

pub const SIM_CONFIG_KIND: &str = "sim-config";

pub fn write_sim_config(path: &Path, cfg: &SimConfig) -> Result<(), IoError> {
    let doc = SimConfigDoc {
        schema: SCHEMA.to_string(),
        kind: SIM_CONFIG_KIND.to_string(),
        config: cfg.clone(),
    };
    let text = toml::to_string_pretty(&doc).expect("sim config serializes");
    write_atomic(path, text.as_bytes())
}

pub fn read_sim_config(path: &Path) -> Result<SimConfig, IoError> {
    if !path.exists() {
        return Err(IoError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let doc: SimConfigDoc =
        toml::from_str(&text).map_err(|e| IoError::parse(path, 1, e.to_string()))?;
    if doc.schema != SCHEMA {
        return Err(IoError::SchemaVersionMismatch {
            path: path.to_path_buf(),
            found: doc.schema,
        });
    }
    Ok(doc.config)
}

/// Per-instrument ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentTruth {
    pub motion: MotionMetrics,
    pub time: TimeMetrics,
}

/// Analytic ground truth for a simulated trial, computed from the
/// uncorrupted profile with the shared metric definitions.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub true_sync_offset_s: f64,
    pub per_instrument: BTreeMap<Instrument, InstrumentTruth>,
    /// Keyed by pair label, dominant instrument first.
    pub per_pair: BTreeMap<String, BimanualMetrics>,
}
