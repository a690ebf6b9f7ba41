//! Header-bearing delimited pose logs.
//!
//! ```text
//! # kinemetrics/1 pose-log
//! # epoch_ns: 0
//! t_ns,body_id,qw,qx,qy,qz,tx,ty,tz,visible
//! 0,tool-bipolar,1.0000000000000000e0,...,1
//! ```
//!
//! Rows carry absolute device nanoseconds; the header's `epoch_ns` (the
//! session epoch) is subtracted at track construction so all per-body logs
//! share one session timeline. Numeric fields are serialized with 17
//! significant digits for lossless round-trips.

use std::collections::BTreeMap;
use std::path::Path;

use crate::io::{fmt_f64, write_atomic, IoError, SCHEMA};
use crate::pose::{PoseSample, PoseTrack, RigidTransform, Timestamp};

pub const POSE_LOG_KIND: &str = "pose-log";
pub const POSE_LOG_COLUMNS: &str = "t_ns,body_id,qw,qx,qy,qz,tx,ty,tz,visible";

/// One pose-log row. `t_ns` is absolute device time; `body_id` is at most
/// 16 characters (the wire device-name limit).
#[derive(Debug, Clone, PartialEq)]
pub struct PoseLogRecord {
    pub t_ns: u64,
    pub body_id: String,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub visible: bool,
}

impl PoseLogRecord {
    pub fn from_sample(body_id: &str, epoch_ns: u64, s: &PoseSample) -> Self {
        let q = s.pose.rotation.quaternion();
        PoseLogRecord {
            t_ns: epoch_ns + s.t.0,
            body_id: body_id.to_string(),
            qw: q.w,
            qx: q.i,
            qy: q.j,
            qz: q.k,
            tx: s.pose.translation.x,
            ty: s.pose.translation.y,
            tz: s.pose.translation.z,
            visible: s.visible,
        }
    }
}

/// A parsed pose log: the session epoch and the raw rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseLog {
    pub epoch_ns: u64,
    pub records: Vec<PoseLogRecord>,
}

impl PoseLog {
    /// Groups records into per-body tracks on the session timeline.
    /// Rows are sorted by time; exact duplicate timestamps within a body
    /// keep the first occurrence.
    pub fn into_tracks(self, camera_id: &str) -> Result<BTreeMap<String, PoseTrack>, IoError> {
        let mut by_body: BTreeMap<String, Vec<PoseSample>> = BTreeMap::new();
        for rec in self.records {
            let t_rel = rec.t_ns.checked_sub(self.epoch_ns).ok_or_else(|| {
                IoError::InvalidManifest {
                    path: Default::default(),
                    msg: format!(
                        "record at t_ns {} precedes the session epoch {}",
                        rec.t_ns, self.epoch_ns
                    ),
                }
            })?;
            let pose = RigidTransform::from_parts(
                rec.qw,
                rec.qx,
                rec.qy,
                rec.qz,
                nalgebra::Vector3::new(rec.tx, rec.ty, rec.tz),
            );
            by_body.entry(rec.body_id).or_default().push(PoseSample {
                t: Timestamp(t_rel),
                pose,
                visible: rec.visible,
            });
        }
        let mut out = BTreeMap::new();
        for (body, mut samples) in by_body {
            samples.sort_by_key(|s| s.t);
            samples.dedup_by_key(|s| s.t);
            let track = PoseTrack::new(body.clone(), camera_id, samples)
                .expect("sorted deduped samples are strictly increasing");
            out.insert(body, track);
        }
        Ok(out)
    }
}

pub fn write_pose_log(path: &Path, epoch_ns: u64, records: &[PoseLogRecord]) -> Result<(), IoError> {
    let mut out = String::with_capacity(64 + records.len() * 160);
    out.push_str(&format!("# {SCHEMA} {POSE_LOG_KIND}\n"));
    out.push_str(&format!("# epoch_ns: {epoch_ns}\n"));
    out.push_str(POSE_LOG_COLUMNS);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.t_ns,
            r.body_id,
            fmt_f64(r.qw),
            fmt_f64(r.qx),
            fmt_f64(r.qy),
            fmt_f64(r.qz),
            fmt_f64(r.tx),
            fmt_f64(r.ty),
            fmt_f64(r.tz),
            u8::from(r.visible),
        ));
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_pose_log(path: &Path) -> Result<PoseLog, IoError> {
    if !path.exists() {
        return Err(IoError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (ln, header) = lines
        .next()
        .ok_or_else(|| IoError::parse(path, 1, "empty file"))?;
    let schema_line = header
        .strip_prefix("# ")
        .ok_or_else(|| IoError::parse(path, ln + 1, "missing schema header"))?;
    let mut parts = schema_line.split_whitespace();
    let schema = parts.next().unwrap_or_default();
    if schema != SCHEMA {
        return Err(IoError::SchemaVersionMismatch {
            path: path.to_path_buf(),
            found: schema.to_string(),
        });
    }
    if parts.next() != Some(POSE_LOG_KIND) {
        return Err(IoError::parse(path, ln + 1, "not a pose-log file"));
    }

    let (ln, epoch_line) = lines
        .next()
        .ok_or_else(|| IoError::parse(path, 2, "missing epoch header"))?;
    let epoch_ns: u64 = epoch_line
        .strip_prefix("# epoch_ns: ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| IoError::parse(path, ln + 1, "malformed epoch_ns header"))?;

    let (ln, columns) = lines
        .next()
        .ok_or_else(|| IoError::parse(path, 3, "missing column header"))?;
    if columns != POSE_LOG_COLUMNS {
        return Err(IoError::parse(path, ln + 1, "unexpected column header"));
    }

    let mut records = Vec::new();
    for (ln, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = ln + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(IoError::parse(
                path,
                lineno,
                format!("expected 10 fields, got {}", fields.len()),
            ));
        }
        let t_ns: u64 = fields[0]
            .parse()
            .map_err(|_| IoError::parse(path, lineno, "bad t_ns"))?;
        let body_id = fields[1].to_string();
        if body_id.is_empty() || body_id.len() > 16 {
            return Err(IoError::parse(
                path,
                lineno,
                "body_id must be 1..=16 characters",
            ));
        }
        let num = |i: usize, name: &str| -> Result<f64, IoError> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| IoError::parse(path, lineno, format!("bad {name}")))
        };
        let qw = num(2, "qw")?;
        let qx = num(3, "qx")?;
        let qy = num(4, "qy")?;
        let qz = num(5, "qz")?;
        let tx = num(6, "tx")?;
        let ty = num(7, "ty")?;
        let tz = num(8, "tz")?;
        let visible = match fields[9] {
            "0" => false,
            "1" => true,
            _ => return Err(IoError::parse(path, lineno, "visible must be 0 or 1")),
        };
        if visible {
            let norm = (qw * qw + qx * qx + qy * qy + qz * qz).sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(IoError::parse(
                    path,
                    lineno,
                    format!("quaternion norm {norm} departs from 1 beyond 1e-6"),
                ));
            }
        }
        records.push(PoseLogRecord {
            t_ns,
            body_id,
            qw,
            qx,
            qy,
            qz,
            tx,
            ty,
            tz,
            visible,
        });
    }
    Ok(PoseLog { epoch_ns, records })
}
