//! Writes a simulated trial to disk in exactly the ingest formats: pose
//! logs, annotations, calibration artifacts, a manifest, the ground truth,
//! and an echo of the generating config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_sim_config, GroundTruth, InstrumentTruth, SimulatedTrial};
use crate::calib::{PivotCalibration, ReferenceCalibration};
use crate::graph::Side;
use crate::io::annotations::write_annotations;
use crate::io::artifacts::{write_pivot_calibration, write_reference_calibration};
use crate::io::manifest::{write_manifest, InstrumentEntry, TrialManifest};
use crate::io::pose_log::{write_pose_log, PoseLogRecord};
use crate::io::{write_atomic, IoError, SCHEMA};
use crate::metrics::{BimanualMetrics, MotionMetrics, TimeMetrics};
use crate::pose::PoseTrack;
use crate::stats::Group;

pub const GROUND_TRUTH_KIND: &str = "ground-truth";

#[derive(Debug, Serialize, Deserialize)]
struct GroundTruthDoc {
    schema: String,
    kind: String,
    true_sync_offset_s: f64,
    instrument: BTreeMap<String, InstrumentTruthDoc>,
    pair: BTreeMap<String, BimanualMetrics>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstrumentTruthDoc {
    motion: MotionMetrics,
    time: TimeMetrics,
}

pub fn write_ground_truth(path: &Path, gt: &GroundTruth) -> Result<(), IoError> {
    let doc = GroundTruthDoc {
        schema: SCHEMA.to_string(),
        kind: GROUND_TRUTH_KIND.to_string(),
        true_sync_offset_s: gt.true_sync_offset_s,
        instrument: gt
            .per_instrument
            .iter()
            .map(|(k, v)| {
                (
                    k.to_string(),
                    InstrumentTruthDoc {
                        motion: v.motion.clone(),
                        time: v.time.clone(),
                    },
                )
            })
            .collect(),
        pair: gt.per_pair.clone(),
    };
    let text = toml::to_string_pretty(&doc).expect("ground truth serializes");
    write_atomic(path, text.as_bytes())
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth, IoError> {
    if !path.exists() {
        return Err(IoError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let doc: GroundTruthDoc =
        toml::from_str(&text).map_err(|e| IoError::parse(path, 1, e.to_string()))?;
    if doc.schema != SCHEMA {
        return Err(IoError::SchemaVersionMismatch {
            path: path.to_path_buf(),
            found: doc.schema,
        });
    }
    let mut per_instrument = BTreeMap::new();
    for (k, v) in doc.instrument {
        let inst = crate::sync::Instrument::parse(&k)
            .ok_or_else(|| IoError::parse(path, 1, format!("unknown instrument {k:?}")))?;
        per_instrument.insert(
            inst,
            InstrumentTruth {
                motion: v.motion,
                time: v.time,
            },
        );
    }
    Ok(GroundTruth {
        true_sync_offset_s: doc.true_sync_offset_s,
        per_instrument,
        per_pair: doc.pair,
    })
}

fn track_records(track: &PoseTrack) -> Vec<PoseLogRecord> {
    track
        .samples()
        .iter()
        .map(|s| PoseLogRecord::from_sample(&track.body_id, 0, s))
        .collect()
}

/// Writes all trial artifacts into `dir` and returns the manifest path.
pub fn write_trial(
    trial: &SimulatedTrial,
    dir: &Path,
    participant: &str,
    group: Group,
    trial_index: u32,
) -> Result<PathBuf, IoError> {
    std::fs::create_dir_all(dir)?;

    let right_ref_path = dir.join("right_ref.csv");
    write_pose_log(&right_ref_path, 0, &track_records(&trial.right_ref_track))?;
    let left_ref_path = dir.join("left_ref.csv");
    write_pose_log(&left_ref_path, 0, &track_records(&trial.left_ref_track))?;

    let annotations_path = dir.join("annotations.csv");
    write_annotations(&annotations_path, &trial.annotations_video)?;

    let ref_cal_path = dir.join("ref_cal.toml");
    write_reference_calibration(
        &ref_cal_path,
        &ReferenceCalibration {
            left_to_right: trial.config.left_ref.to_transform(),
            rms_residual: 0.0,
            pair_count: 1,
        },
    )?;

    let mut entries = Vec::new();
    for profile in &trial.config.instruments {
        let track = &trial.tool_tracks[&profile.name];
        let tool_log = dir.join(format!("tool_{}.csv", profile.name));
        write_pose_log(&tool_log, 0, &track_records(track))?;

        let pivot_path = dir.join(format!("pivot_{}.toml", profile.name));
        // Authored truth rather than a solved calibration; sample_count 0
        // marks it as synthetic.
        write_pivot_calibration(
            &pivot_path,
            &PivotCalibration {
                tip_offset: nalgebra::Vector3::from(profile.tip_offset_mm),
                pivot_point: nalgebra::Vector3::zeros(),
                rms_residual: 0.0,
                sample_count: 0,
                rotation_coverage_deg: 0.0,
            },
        )?;

        entries.push(InstrumentEntry {
            instrument: profile.name,
            side: profile.side,
            tool_log,
            ref_log: match profile.side {
                Side::Right => right_ref_path.clone(),
                Side::Left => left_ref_path.clone(),
            },
            pivot_calibration: pivot_path,
        });
    }

    let manifest = TrialManifest {
        participant: participant.to_string(),
        group,
        dominant_hand: Side::Right,
        trial_index,
        annotations: annotations_path,
        video_contact_mark_s: Some(trial.config.video_contact_mark_s),
        sync_offset_s: None,
        reference_calibration: Some(ref_cal_path),
        instruments: entries,
    };
    let manifest_path = dir.join("manifest.toml");
    write_manifest(&manifest_path, &manifest)?;

    write_ground_truth(&dir.join("ground_truth.toml"), &trial.ground_truth)?;
    write_sim_config(&dir.join("sim_config.toml"), &trial.config)?;

    Ok(manifest_path)
}
