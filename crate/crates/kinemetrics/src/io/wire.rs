//! Bit-exact binary wire protocol for live pose streaming and session
//! recording, plus the stream-capture recorder.
//!
//! Message layout (big-endian, 135 bytes total for TRANSFORM):
//!
//! | offset | size | field                                       |
//! |--------|------|---------------------------------------------|
//! | 0      | 4    | magic `"PSTR"`                              |
//! | 4      | 1    | version (= 1)                               |
//! | 5      | 1    | msg_type (1 = TRANSFORM, 2 = KEEPALIVE)     |
//! | 6      | 4    | total message length in bytes, u32          |
//! | 10     | 16   | device name, ASCII null-padded              |
//! | 26     | 8    | t_ns, u64                                   |
//! | 34     | 1    | status (0 = OK, 1 = NOT_VISIBLE), TRANSFORM |
//! | 35     | 96   | 12 x f64 row-major 3x4 [R | t], TRANSFORM   |
//! | len-4  | 4    | CRC-32 (IEEE) over all preceding bytes      |
//!
//! KEEPALIVE carries no status or payload and is 38 bytes. Decoding
//! validates magic, version, type, declared length, and CRC, in that order,
//! and never reads past the declared message length.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::sync::Mutex;

use nalgebra::Matrix3;
use thiserror::Error;

use crate::io::pose_log::{write_pose_log, PoseLogRecord};
use crate::io::IoError;
use crate::pose::RigidTransform;

pub const WIRE_MAGIC: [u8; 4] = *b"PSTR";
pub const WIRE_VERSION: u8 = 1;
pub const MSG_TRANSFORM: u8 = 1;
pub const MSG_KEEPALIVE: u8 = 2;
pub const TRANSFORM_LEN: usize = 135;
pub const KEEPALIVE_LEN: usize = 38;
pub const DEVICE_NAME_LEN: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown message type {0}")]
    UnknownMsgType(u8),
    #[error("declared length {declared} does not match {expected} for this message type")]
    BadLength { declared: u32, expected: u32 },
    #[error("message truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("crc mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("device name must be at most 16 ASCII bytes")]
    InvalidDeviceName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireStatus {
    Ok,
    NotVisible,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WireBody {
    Transform {
        status: WireStatus,
        /// Row-major 3x4: rotation rows with the translation as the fourth
        /// column.
        matrix: [f64; 12],
    },
    KeepAlive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    /// Raw null-padded device name bytes, preserved exactly for re-encoding.
    pub device: [u8; DEVICE_NAME_LEN],
    pub t_ns: u64,
    pub body: WireBody,
}

impl WireMessage {
    pub fn transform(
        device_name: &str,
        t_ns: u64,
        status: WireStatus,
        pose: &RigidTransform,
    ) -> Result<Self, WireError> {
        let device = encode_device_name(device_name)?;
        let r = pose.rotation_matrix();
        let t = pose.translation;
        let matrix = [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ];
        Ok(WireMessage {
            device,
            t_ns,
            body: WireBody::Transform { status, matrix },
        })
    }

    pub fn keepalive(device_name: &str, t_ns: u64) -> Result<Self, WireError> {
        Ok(WireMessage {
            device: encode_device_name(device_name)?,
            t_ns,
            body: WireBody::KeepAlive,
        })
    }

    /// Device name with trailing padding stripped.
    pub fn device_name(&self) -> String {
        let end = self
            .device
            .iter()
            .position(|&b| b == 0)
            .unwrap_or(DEVICE_NAME_LEN);
        String::from_utf8_lossy(&self.device[..end]).into_owned()
    }

    pub fn encoded_len(&self) -> usize {
        match self.body {
            WireBody::Transform { .. } => TRANSFORM_LEN,
            WireBody::KeepAlive => KEEPALIVE_LEN,
        }
    }

    /// Converts a TRANSFORM into a pose-log record, validating that the
    /// rotation block is orthonormal within 1e-6 when visible.
    pub fn to_record(&self) -> Option<PoseLogRecord> {
        let WireBody::Transform { status, matrix } = &self.body else {
            return None;
        };
        let visible = *status == WireStatus::Ok;
        let (pose, valid) = if visible {
            let r = Matrix3::new(
                matrix[0], matrix[1], matrix[2], matrix[4], matrix[5], matrix[6], matrix[8],
                matrix[9], matrix[10],
            );
            let ortho = (r * r.transpose() - Matrix3::identity()).norm();
            if ortho > 1e-6 {
                (RigidTransform::identity(), false)
            } else {
                (
                    RigidTransform::from_matrix(
                        &r,
                        nalgebra::Vector3::new(matrix[3], matrix[7], matrix[11]),
                    ),
                    true,
                )
            }
        } else {
            (RigidTransform::identity(), true)
        };
        if !valid {
            return None;
        }
        let q = pose.rotation.quaternion();
        Some(PoseLogRecord {
            t_ns: self.t_ns,
            body_id: self.device_name(),
            qw: q.w,
            qx: q.i,
            qy: q.j,
            qz: q.k,
            tx: pose.translation.x,
            ty: pose.translation.y,
            tz: pose.translation.z,
            visible,
        })
    }
}

fn encode_device_name(name: &str) -> Result<[u8; DEVICE_NAME_LEN], WireError> {
    if name.len() > DEVICE_NAME_LEN || !name.is_ascii() || name.bytes().any(|b| b == 0) {
        return Err(WireError::InvalidDeviceName);
    }
    let mut device = [0u8; DEVICE_NAME_LEN];
    device[..name.len()].copy_from_slice(name.as_bytes());
    Ok(device)
}

/// Encodes a message into its exact wire bytes.
pub fn encode_wire(msg: &WireMessage) -> Vec<u8> {
    let len = msg.encoded_len();
    let mut out = Vec::with_capacity(len);
    out.extend_from_slice(&WIRE_MAGIC);
    out.push(WIRE_VERSION);
    match &msg.body {
        WireBody::Transform { status, matrix } => {
            out.push(MSG_TRANSFORM);
            out.extend_from_slice(&(len as u32).to_be_bytes());
            out.extend_from_slice(&msg.device);
            out.extend_from_slice(&msg.t_ns.to_be_bytes());
            out.push(match status {
                WireStatus::Ok => 0,
                WireStatus::NotVisible => 1,
            });
            for v in matrix {
                out.extend_from_slice(&v.to_be_bytes());
            }
        }
        WireBody::KeepAlive => {
            out.push(MSG_KEEPALIVE);
            out.extend_from_slice(&(len as u32).to_be_bytes());
            out.extend_from_slice(&msg.device);
            out.extend_from_slice(&msg.t_ns.to_be_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_be_bytes());
    debug_assert_eq!(out.len(), len);
    out
}

/// Decodes one message from the front of `bytes`, returning it and the
/// number of bytes consumed. Validation order: magic, version, type,
/// declared length, CRC. Never reads past the declared message length.
pub fn decode_wire(bytes: &[u8]) -> Result<(WireMessage, usize), WireError> {
    if bytes.len() < 4 {
        return Err(WireError::Truncated {
            need: 4,
            have: bytes.len(),
        });
    }
    if bytes[..4] != WIRE_MAGIC {
        return Err(WireError::BadMagic);
    }
    if bytes.len() < 6 {
        return Err(WireError::Truncated {
            need: 6,
            have: bytes.len(),
        });
    }
    let version = bytes[4];
    if version != WIRE_VERSION {
        return Err(WireError::UnsupportedVersion(version));
    }
    let msg_type = bytes[5];
    let expected = match msg_type {
        MSG_TRANSFORM => TRANSFORM_LEN as u32,
        MSG_KEEPALIVE => KEEPALIVE_LEN as u32,
        other => return Err(WireError::UnknownMsgType(other)),
    };
    if bytes.len() < 10 {
        return Err(WireError::Truncated {
            need: 10,
            have: bytes.len(),
        });
    }
    let declared = u32::from_be_bytes(bytes[6..10].try_into().unwrap());
    if declared != expected {
        return Err(WireError::BadLength { declared, expected });
    }
    let total = declared as usize;
    if bytes.len() < total {
        return Err(WireError::Truncated {
            need: total,
            have: bytes.len(),
        });
    }
    let frame = &bytes[..total];
    let stored = u32::from_be_bytes(frame[total - 4..].try_into().unwrap());
    let computed = crc32fast::hash(&frame[..total - 4]);
    if stored != computed {
        return Err(WireError::CrcMismatch { stored, computed });
    }

    let mut device = [0u8; DEVICE_NAME_LEN];
    device.copy_from_slice(&frame[10..26]);
    let t_ns = u64::from_be_bytes(frame[26..34].try_into().unwrap());
    let body = match msg_type {
        MSG_TRANSFORM => {
            let status = match frame[34] {
                0 => WireStatus::Ok,
                _ => WireStatus::NotVisible,
            };
            let mut matrix = [0.0f64; 12];
            for (i, m) in matrix.iter_mut().enumerate() {
                let off = 35 + 8 * i;
                *m = f64::from_be_bytes(frame[off..off + 8].try_into().unwrap());
            }
            WireBody::Transform { status, matrix }
        }
        _ => WireBody::KeepAlive,
    };
    Ok((
        WireMessage {
            device,
            t_ns,
            body,
        },
        total,
    ))
}

/// Per-body tallies from a capture run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BodySummary {
    pub records: usize,
    pub visible: usize,
}

/// Result of recording one or more wire streams into a session directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CaptureSummary {
    pub per_body: BTreeMap<String, BodySummary>,
    pub dropped: usize,
    pub keepalives: usize,
    /// First message timestamp across the whole session.
    pub epoch_ns: Option<u64>,
}

#[derive(Default)]
struct CaptureState {
    records: BTreeMap<String, Vec<PoseLogRecord>>,
    summary: CaptureSummary,
}

/// Accumulates wire streams from one or more concurrent sources and writes
/// one pose log per tracked body at finalization. Malformed input is never
/// fatal: bad messages are counted and skipped, resynchronizing on the next
/// magic.
pub struct CaptureSession {
    state: Mutex<CaptureState>,
}

impl Default for CaptureSession {
    fn default() -> Self {
        Self::new()
    }
}

impl CaptureSession {
    pub fn new() -> Self {
        CaptureSession {
            state: Mutex::new(CaptureState::default()),
        }
    }

    /// Reads a byte stream to exhaustion, decoding and buffering every valid
    /// TRANSFORM. Safe to call from multiple threads, one per source.
    pub fn ingest(&self, mut reader: impl Read) -> Result<(), IoError> {
        let mut buf: Vec<u8> = Vec::with_capacity(128 * 1024);
        let mut chunk = [0u8; 64 * 1024];
        let mut local_records: Vec<PoseLogRecord> = Vec::new();
        let mut local_dropped = 0usize;
        let mut local_keepalives = 0usize;
        let mut eof = false;

        while !eof || !buf.is_empty() {
            if !eof {
                let n = reader.read(&mut chunk)?;
                if n == 0 {
                    eof = true;
                } else {
                    buf.extend_from_slice(&chunk[..n]);
                }
            }

            let mut cursor = 0usize;
            loop {
                let Some(rel) = find_magic(&buf[cursor..]) else {
                    // No magic anywhere; keep a potential partial prefix.
                    cursor = buf.len().saturating_sub(3).max(cursor);
                    break;
                };
                let start = cursor + rel;
                match decode_wire(&buf[start..]) {
                    Ok((msg, consumed)) => {
                        match &msg.body {
                            WireBody::Transform { .. } => match msg.to_record() {
                                Some(rec) => local_records.push(rec),
                                None => local_dropped += 1,
                            },
                            WireBody::KeepAlive => local_keepalives += 1,
                        }
                        cursor = start + consumed;
                    }
                    Err(WireError::Truncated { .. }) if !eof => {
                        cursor = start;
                        break;
                    }
                    Err(_) => {
                        local_dropped += 1;
                        cursor = start + 1;
                    }
                }
            }
            buf.drain(..cursor);
            if eof {
                break;
            }
        }

        let mut state = self.state.lock().expect("capture state poisoned");
        for rec in local_records {
            let entry = state.summary.per_body.entry(rec.body_id.clone()).or_default();
            entry.records += 1;
            if rec.visible {
                entry.visible += 1;
            }
            state.summary.epoch_ns = Some(match state.summary.epoch_ns {
                None => rec.t_ns,
                Some(e) => e.min(rec.t_ns),
            });
            state.records.entry(rec.body_id.clone()).or_default().push(rec);
        }
        state.summary.dropped += local_dropped;
        state.summary.keepalives += local_keepalives;
        Ok(())
    }

    /// Writes one `<body>.csv` pose log per tracked body into `dir` (sorted
    /// by timestamp, atomic rename) and returns the session summary.
    pub fn finalize(self, dir: &Path) -> Result<CaptureSummary, IoError> {
        let state = self.state.into_inner().expect("capture state poisoned");
        let epoch = state.summary.epoch_ns.unwrap_or(0);
        for (body, mut records) in state.records {
            records.sort_by_key(|r| r.t_ns);
            let path = dir.join(format!("{}.csv", sanitize_body_id(&body)));
            write_pose_log(&path, epoch, &records)?;
        }
        Ok(state.summary)
    }
}

fn find_magic(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == WIRE_MAGIC)
}

fn sanitize_body_id(body: &str) -> String {
    body.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Convenience wrapper: capture a single source into `dir`.
pub fn capture_stream(reader: impl Read, dir: &Path) -> Result<CaptureSummary, IoError> {
    let session = CaptureSession::new();
    session.ingest(reader)?;
    session.finalize(dir)
}
