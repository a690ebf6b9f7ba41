//! Versioned TOML artifacts for calibration results, so the CLI can persist
//! and reload them between the calibration and analysis phases.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::calib::{PivotCalibration, ReferenceCalibration};
use crate::io::{write_atomic, IoError, SCHEMA};
use crate::pose::RigidTransform;

pub const PIVOT_KIND: &str = "pivot-calibration";
pub const REFERENCE_KIND: &str = "reference-calibration";

#[derive(Debug, Serialize, Deserialize)]
struct PivotDoc {
    schema: String,
    kind: String,
    tip_offset_mm: [f64; 3],
    pivot_point_mm: [f64; 3],
    rms_residual_mm: f64,
    sample_count: usize,
    rotation_coverage_deg: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReferenceDoc {
    schema: String,
    kind: String,
    /// Rotation quaternion as (w, x, y, z).
    rotation_wxyz: [f64; 4],
    translation_mm: [f64; 3],
    rms_residual_mm: f64,
    pair_count: usize,
}

fn check_header(path: &Path, schema: &str, kind: &str, expected_kind: &str) -> Result<(), IoError> {
    if schema != SCHEMA {
        return Err(IoError::SchemaVersionMismatch {
            path: path.to_path_buf(),
            found: schema.to_string(),
        });
    }
    if kind != expected_kind {
        return Err(IoError::parse(
            path,
            1,
            format!("artifact kind {kind:?} is not {expected_kind:?}"),
        ));
    }
    Ok(())
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    if !path.exists() {
        return Err(IoError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| IoError::parse(path, 1, e.to_string()))
}

pub fn write_pivot_calibration(path: &Path, cal: &PivotCalibration) -> Result<(), IoError> {
    let doc = PivotDoc {
        schema: SCHEMA.to_string(),
        kind: PIVOT_KIND.to_string(),
        tip_offset_mm: cal.tip_offset.into(),
        pivot_point_mm: cal.pivot_point.into(),
        rms_residual_mm: cal.rms_residual,
        sample_count: cal.sample_count,
        rotation_coverage_deg: cal.rotation_coverage_deg,
    };
    let text = toml::to_string_pretty(&doc).expect("pivot artifact serializes");
    write_atomic(path, text.as_bytes())
}

pub fn read_pivot_calibration(path: &Path) -> Result<PivotCalibration, IoError> {
    let doc: PivotDoc = read_toml(path)?;
    check_header(path, &doc.schema, &doc.kind, PIVOT_KIND)?;
    Ok(PivotCalibration {
        tip_offset: Vector3::from(doc.tip_offset_mm),
        pivot_point: Vector3::from(doc.pivot_point_mm),
        rms_residual: doc.rms_residual_mm,
        sample_count: doc.sample_count,
        rotation_coverage_deg: doc.rotation_coverage_deg,
    })
}

pub fn write_reference_calibration(
    path: &Path,
    cal: &ReferenceCalibration,
) -> Result<(), IoError> {
    let q = cal.left_to_right.rotation.quaternion();
    let doc = ReferenceDoc {
        schema: SCHEMA.to_string(),
        kind: REFERENCE_KIND.to_string(),
        rotation_wxyz: [q.w, q.i, q.j, q.k],
        translation_mm: cal.left_to_right.translation.into(),
        rms_residual_mm: cal.rms_residual,
        pair_count: cal.pair_count,
    };
    let text = toml::to_string_pretty(&doc).expect("reference artifact serializes");
    write_atomic(path, text.as_bytes())
}

pub fn read_reference_calibration(path: &Path) -> Result<ReferenceCalibration, IoError> {
    let doc: ReferenceDoc = read_toml(path)?;
    check_header(path, &doc.schema, &doc.kind, REFERENCE_KIND)?;
    let [w, x, y, z] = doc.rotation_wxyz;
    let norm = (w * w + x * x + y * y + z * z).sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(IoError::parse(
            path,
            1,
            format!("rotation quaternion norm {norm} departs from 1 beyond 1e-6"),
        ));
    }
    Ok(ReferenceCalibration {
        left_to_right: RigidTransform::from_parts(w, x, y, z, Vector3::from(doc.translation_mm)),
        rms_residual: doc.rms_residual_mm,
        pair_count: doc.pair_count,
    })
}
