//! External data contracts: the binary pose-stream wire protocol, pose-log
//! and annotation files, calibration artifacts, and trial manifests.
//!
//! File formats are header-bearing delimited text or versioned TOML; the
//! binary protocol exists only on the wire. Every file embeds the schema
//! version string so readers can reject incompatible data early.

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod annotations;
pub mod artifacts;
pub mod manifest;
pub mod pose_log;
pub mod report;
pub mod wire;

/// Schema version embedded in every file header.
pub const SCHEMA: &str = "kinemetrics/1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("{path}: schema version {found:?} is not {SCHEMA:?}")]
    SchemaVersionMismatch { path: PathBuf, found: String },
    #[error("{path}: {msg}")]
    InvalidManifest { path: PathBuf, msg: String },
}

impl IoError {
    pub(crate) fn parse(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }
}

/// Writes a file atomically: everything goes to a temporary file in the
/// destination directory which is renamed into place, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile_in(dir)?;
    tmp.1.write_all(bytes)?;
    tmp.1.sync_all()?;
    drop(tmp.1);
    std::fs::rename(&tmp.0, path)?;
    Ok(())
}

fn tempfile_in(dir: &Path) -> Result<(PathBuf, std::fs::File), IoError> {
    use std::time::{SystemTime, UNIX_EPOCH};
    let nonce = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let pid = std::process::id();
    for attempt in 0..100u32 {
        let candidate = dir.join(format!(".tmp-{pid}-{nonce}-{attempt}"));
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&candidate)
        {
            Ok(f) => return Ok((candidate, f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(IoError::Io(std::io::Error::other(
        "could not create temporary file",
    )))
}

/// Serializes an f64 with 17 significant digits, enough for lossless
/// round-trips.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
