//! Trial manifests: one TOML document binding participant metadata, pose
//! logs, annotations, and calibration artifacts for one trial.
//!
//! A manifest is fully validated before any computation starts: referenced
//! files must exist, instruments must come from the tracked set, and the
//! group label must be one of the four cohort groups.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graph::Side;
use crate::io::{write_atomic, IoError, SCHEMA};
use crate::stats::Group;
use crate::sync::Instrument;

pub const MANIFEST_KIND: &str = "trial-manifest";

#[derive(Debug, Serialize, Deserialize)]
struct ManifestDoc {
    schema: String,
    kind: String,
    participant: String,
    group: String,
    dominant_hand: String,
    trial_index: u32,
    annotations: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    video_contact_mark_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sync_offset_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_calibration: Option<String>,
    #[serde(rename = "instrument")]
    instruments: Vec<InstrumentDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstrumentDoc {
    name: String,
    side: String,
    tool_log: String,
    ref_log: String,
    pivot_calibration: String,
}

/// One instrument's data binding within a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentEntry {
    pub instrument: Instrument,
    pub side: Side,
    pub tool_log: PathBuf,
    pub ref_log: PathBuf,
    pub pivot_calibration: PathBuf,
}

/// A validated trial manifest with absolute paths.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialManifest {
    pub participant: String,
    pub group: Group,
    pub dominant_hand: Side,
    pub trial_index: u32,
    pub annotations: PathBuf,
    pub video_contact_mark_s: Option<f64>,
    pub sync_offset_s: Option<f64>,
    pub reference_calibration: Option<PathBuf>,
    pub instruments: Vec<InstrumentEntry>,
}

impl TrialManifest {
    pub fn instrument(&self, inst: Instrument) -> Option<&InstrumentEntry> {
        self.instruments.iter().find(|e| e.instrument == inst)
    }
}

pub fn write_manifest(path: &Path, manifest: &TrialManifest) -> Result<(), IoError> {
    let rel = |p: &Path| -> String {
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        p.strip_prefix(base)
            .unwrap_or(p)
            .to_string_lossy()
            .into_owned()
    };
    let doc = ManifestDoc {
        schema: SCHEMA.to_string(),
        kind: MANIFEST_KIND.to_string(),
        participant: manifest.participant.clone(),
        group: manifest.group.as_str().to_string(),
        dominant_hand: manifest.dominant_hand.as_str().to_string(),
        trial_index: manifest.trial_index,
        annotations: rel(&manifest.annotations),
        video_contact_mark_s: manifest.video_contact_mark_s,
        sync_offset_s: manifest.sync_offset_s,
        reference_calibration: manifest.reference_calibration.as_deref().map(rel),
        instruments: manifest
            .instruments
            .iter()
            .map(|e| InstrumentDoc {
                name: e.instrument.as_str().to_string(),
                side: e.side.as_str().to_string(),
                tool_log: rel(&e.tool_log),
                ref_log: rel(&e.ref_log),
                pivot_calibration: rel(&e.pivot_calibration),
            })
            .collect(),
    };
    let text = toml::to_string_pretty(&doc).expect("manifest serializes");
    write_atomic(path, text.as_bytes())
}

/// Loads and fully validates a manifest. Every referenced file must exist;
/// paths are resolved relative to the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<TrialManifest, IoError> {
    if !path.exists() {
        return Err(IoError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let doc: ManifestDoc =
        toml::from_str(&text).map_err(|e| IoError::parse(path, 1, e.to_string()))?;
    if doc.schema != SCHEMA {
        return Err(IoError::SchemaVersionMismatch {
            path: path.to_path_buf(),
            found: doc.schema,
        });
    }
    if doc.kind != MANIFEST_KIND {
        return Err(IoError::InvalidManifest {
            path: path.to_path_buf(),
            msg: format!("kind {:?} is not {MANIFEST_KIND:?}", doc.kind),
        });
    }
    let invalid = |msg: String| IoError::InvalidManifest {
        path: path.to_path_buf(),
        msg,
    };

    let group = Group::parse(&doc.group)
        .ok_or_else(|| invalid(format!("unknown group label {:?}", doc.group)))?;
    let dominant_hand = Side::parse(&doc.dominant_hand)
        .ok_or_else(|| invalid(format!("unknown dominant hand {:?}", doc.dominant_hand)))?;
    if doc.instruments.is_empty() {
        return Err(invalid("manifest lists no instruments".to_string()));
    }

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |rel: &str| -> Result<PathBuf, IoError> {
        let p = base.join(rel);
        if p.exists() {
            Ok(p)
        } else {
            Err(IoError::MissingFile(p))
        }
    };

    let annotations = resolve(&doc.annotations)?;
    let reference_calibration = doc
        .reference_calibration
        .as_deref()
        .map(resolve)
        .transpose()?;

    let mut instruments = Vec::new();
    for idoc in &doc.instruments {
        let instrument = Instrument::parse(&idoc.name)
            .ok_or_else(|| invalid(format!("unknown instrument {:?}", idoc.name)))?;
        if instruments
            .iter()
            .any(|e: &InstrumentEntry| e.instrument == instrument)
        {
            return Err(invalid(format!("duplicate instrument {:?}", idoc.name)));
        }
        let side = Side::parse(&idoc.side)
            .ok_or_else(|| invalid(format!("unknown camera side {:?}", idoc.side)))?;
        instruments.push(InstrumentEntry {
            instrument,
            side,
            tool_log: resolve(&idoc.tool_log)?,
            ref_log: resolve(&idoc.ref_log)?,
            pivot_calibration: resolve(&idoc.pivot_calibration)?,
        });
    }

    if instruments.iter().any(|e| e.side == Side::Left) && reference_calibration.is_none() {
        return Err(invalid(
            "left-side instruments require reference_calibration".to_string(),
        ));
    }

    Ok(TrialManifest {
        participant: doc.participant,
        group,
        dominant_hand,
        trial_index: doc.trial_index,
        annotations,
        video_contact_mark_s: doc.video_contact_mark_s,
        sync_offset_s: doc.sync_offset_s,
        reference_calibration,
        instruments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(path: &Path) {
        std::fs::write(path, "stub").unwrap();
    }

    fn write_valid_manifest(dir: &Path) -> PathBuf {
        for f in [
            "annotations.csv",
            "bipolar_tool.csv",
            "right_ref.csv",
            "pivot_bipolar.toml",
        ] {
            touch(&dir.join(f));
        }
        let text = format!(
            r#"schema = "{SCHEMA}"
kind = "trial-manifest"
participant = "P01"
group = "Student"
dominant_hand = "right"
trial_index = 1
annotations = "annotations.csv"
video_contact_mark_s = 0.0

[[instrument]]
name = "bipolar"
side = "right"
tool_log = "bipolar_tool.csv"
ref_log = "right_ref.csv"
pivot_calibration = "pivot_bipolar.toml"
"#
        );
        let path = dir.join("trial.toml");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn loads_valid_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_valid_manifest(dir.path());
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.participant, "P01");
        assert_eq!(m.group, Group::Student);
        assert_eq!(m.instruments.len(), 1);
        assert_eq!(m.instruments[0].instrument, Instrument::Bipolar);
        assert!(m.instruments[0].tool_log.is_absolute() || m.instruments[0].tool_log.exists());
    }

    #[test]
    fn missing_referenced_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_valid_manifest(dir.path());
        std::fs::remove_file(dir.path().join("annotations.csv")).unwrap();
        match load_manifest(&path) {
            Err(IoError::MissingFile(p)) => assert!(p.ends_with("annotations.csv")),
            other => panic!("expected MissingFile, got {other:?}"),
        }
    }

    #[test]
    fn left_instrument_requires_reference_calibration() {
        let dir = tempfile::tempdir().unwrap();
        for f in [
            "annotations.csv",
            "aspirator_tool.csv",
            "left_ref.csv",
            "pivot_aspirator.toml",
        ] {
            touch(&dir.path().join(f));
        }
        let text = format!(
            r#"schema = "{SCHEMA}"
kind = "trial-manifest"
participant = "P02"
group = "Expert"
dominant_hand = "right"
trial_index = 2
annotations = "annotations.csv"

[[instrument]]
name = "aspirator"
side = "left"
tool_log = "aspirator_tool.csv"
ref_log = "left_ref.csv"
pivot_calibration = "pivot_aspirator.toml"
"#
        );
        let path = dir.path().join("trial.toml");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_manifest(&path),
            Err(IoError::InvalidManifest { .. })
        ));
    }

    #[test]
    fn unknown_group_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_valid_manifest(dir.path());
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"Student\"", "\"Wizard\"");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_manifest(&path),
            Err(IoError::InvalidManifest { .. })
        ));
    }
}
