//! Manual-annotation ingestion types and video-to-tracking temporal
//! synchronization via the tip-contact gesture.
//!
//! Video and tracking run on separate clocks; at the start of a trial the
//! participant touches the bipolar and aspirator tips together, and that
//! gesture is the temporal marker aligning the two timelines.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intervals::{Interval, IntervalSet};
use crate::pose::{Timestamp, Trajectory};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SyncError {
    #[error("no qualifying contact span found (threshold {threshold_mm} mm, hold {min_hold_ms} ms)")]
    NoContactDetected { threshold_mm: u64, min_hold_ms: u64 },
    #[error("shifted interval would start before the session epoch")]
    UnderflowBeforeEpoch,
    #[error("trajectory is empty")]
    EmptyTrajectory,
}

/// The tracked instrument set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instrument {
    Bipolar,
    Aspirator,
    Scissors,
}

impl Instrument {
    pub const ALL: [Instrument; 3] = [
        Instrument::Bipolar,
        Instrument::Aspirator,
        Instrument::Scissors,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Instrument::Bipolar => "bipolar",
            Instrument::Aspirator => "aspirator",
            Instrument::Scissors => "scissors",
        }
    }

    pub fn parse(s: &str) -> Option<Instrument> {
        match s {
            "bipolar" => Some(Instrument::Bipolar),
            "aspirator" => Some(Instrument::Aspirator),
            "scissors" => Some(Instrument::Scissors),
            _ => None,
        }
    }
}

impl fmt::Display for Instrument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-instrument usage intervals, on either the video or tracking timeline
/// depending on pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotationSet {
    per_instrument: BTreeMap<Instrument, IntervalSet>,
}

impl AnnotationSet {
    /// Builds a normalized set from raw rows. Returns the number of rows that
    /// were merged away (overlapping or touching an earlier row for the same
    /// instrument) so the ingest layer can warn about annotator overlap.
    pub fn from_entries(entries: Vec<(Instrument, Interval)>) -> (Self, usize) {
        let mut raw: BTreeMap<Instrument, Vec<Interval>> = BTreeMap::new();
        for (inst, iv) in entries {
            raw.entry(inst).or_default().push(iv);
        }
        let mut merged_away = 0;
        let mut per_instrument = BTreeMap::new();
        for (inst, ivs) in raw {
            let n_raw = ivs.len();
            let set = IntervalSet::from_intervals(ivs);
            merged_away += n_raw - set.intervals().len();
            per_instrument.insert(inst, set);
        }
        (Self { per_instrument }, merged_away)
    }

    pub fn usage(&self, instrument: Instrument) -> IntervalSet {
        self.per_instrument
            .get(&instrument)
            .cloned()
            .unwrap_or_default()
    }

    pub fn instruments(&self) -> impl Iterator<Item = Instrument> + '_ {
        self.per_instrument.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Instrument, &IntervalSet)> {
        self.per_instrument.iter().map(|(k, v)| (*k, v))
    }

    /// Span from the first annotated activity start to the last annotated
    /// activity end across all instruments; the trial span used by the
    /// efficiency index.
    pub fn trial_span(&self) -> Option<Interval> {
        let start = self
            .per_instrument
            .values()
            .filter_map(|s| s.span().map(|iv| iv.start))
            .min()?;
        let end = self
            .per_instrument
            .values()
            .filter_map(|s| s.span().map(|iv| iv.end))
            .max()?;
        Interval::new(start, end)
    }
}

/// How a sync offset was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncConfidence {
    Detected,
    Manual,
}

/// Alignment between the video and tracking timelines:
/// `tracking_time = video_time + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncOffset {
    pub offset_ns: i64,
    pub contact_time_tracking: Timestamp,
    pub confidence: SyncConfidence,
}

impl SyncOffset {
    pub fn manual(offset_ns: i64) -> Self {
        let contact = if offset_ns >= 0 {
            Timestamp(offset_ns as u64)
        } else {
            Timestamp(0)
        };
        SyncOffset {
            offset_ns,
            contact_time_tracking: contact,
            confidence: SyncConfidence::Manual,
        }
    }
}

/// Maximum timestamp mismatch when pairing the two tip trajectories.
pub const CONTACT_PAIRING_WINDOW_MS: f64 = 20.0;
/// A below-threshold run is broken when consecutive paired samples are
/// further apart than this; matches the reference-matching window used by
/// the transform graph.
pub const CONTACT_RUN_GAP_MS: f64 = 50.0;

/// Finds the earliest span of at least `min_hold_ms` during which the
/// inter-tip distance (nearest-timestamp pairing within 20 ms) stays at or
/// below `threshold_mm`, and derives the video-to-tracking offset from the
/// annotated video-side contact mark.
pub fn detect_contact_sync(
    traj_a: &Trajectory,
    traj_b: &Trajectory,
    threshold_mm: f64,
    min_hold_ms: f64,
    video_contact_mark: Timestamp,
) -> Result<SyncOffset, SyncError> {
    if traj_a.is_empty() || traj_b.is_empty() {
        return Err(SyncError::EmptyTrajectory);
    }
    let pairing_ns = (CONTACT_PAIRING_WINDOW_MS * 1e6) as u64;
    let run_gap_ns = (CONTACT_RUN_GAP_MS * 1e6) as u64;
    let min_hold_ns = (min_hold_ms * 1e6).round() as u64;

    // Distances at trajectory-A timestamps that have a B partner.
    let mut below: Vec<(Timestamp, bool)> = Vec::new();
    for (t, pa) in &traj_a.points {
        if let Some(pb) = nearest_point(traj_b, *t, pairing_ns) {
            below.push((*t, (pa - pb).norm() <= threshold_mm));
        }
    }

    let mut run_start: Option<Timestamp> = None;
    let mut run_end: Option<Timestamp> = None;
    for (t, ok) in below {
        if ok {
            match (run_start, run_end) {
                (Some(_), Some(e)) if t.abs_diff(e) <= run_gap_ns => run_end = Some(t),
                (Some(s), Some(e)) => {
                    if e.0 - s.0 >= min_hold_ns {
                        return Ok(make_offset(s, video_contact_mark));
                    }
                    run_start = Some(t);
                    run_end = Some(t);
                }
                _ => {
                    run_start = Some(t);
                    run_end = Some(t);
                }
            }
        } else if let (Some(s), Some(e)) = (run_start, run_end) {
            if e.0 - s.0 >= min_hold_ns {
                return Ok(make_offset(s, video_contact_mark));
            }
            run_start = None;
            run_end = None;
        }
    }
    if let (Some(s), Some(e)) = (run_start, run_end) {
        if e.0 - s.0 >= min_hold_ns {
            return Ok(make_offset(s, video_contact_mark));
        }
    }
    Err(SyncError::NoContactDetected {
        threshold_mm: threshold_mm.round() as u64,
        min_hold_ms: min_hold_ms.round() as u64,
    })
}

fn make_offset(contact: Timestamp, video_mark: Timestamp) -> SyncOffset {
    SyncOffset {
        offset_ns: contact.0 as i64 - video_mark.0 as i64,
        contact_time_tracking: contact,
        confidence: SyncConfidence::Detected,
    }
}

/// Nearest trajectory point to `t` within `window_ns`, by absolute time
/// difference.
pub(crate) fn nearest_point(
    traj: &Trajectory,
    t: Timestamp,
    window_ns: u64,
) -> Option<nalgebra::Vector3<f64>> {
    let pts = &traj.points;
    if pts.is_empty() {
        return None;
    }
    let idx = pts.partition_point(|(pt, _)| *pt < t);
    let mut best: Option<(u64, usize)> = None;
    for cand in [idx.wrapping_sub(1), idx] {
        if cand < pts.len() {
            let d = pts[cand].0.abs_diff(t);
            if d <= window_ns && best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, cand));
            }
        }
    }
    best.map(|(_, i)| pts[i].1)
}

/// Shifts every interval of an annotation set by the sync offset, moving it
/// onto the tracking timeline. Ordering and durations are preserved exactly.
pub fn apply_offset(ann: &AnnotationSet, off: &SyncOffset) -> Result<AnnotationSet, SyncError> {
    let mut out = BTreeMap::new();
    for (inst, set) in ann.iter() {
        let mut shifted = Vec::with_capacity(set.intervals().len());
        for iv in set.intervals() {
            let s = iv.start.0 as i128 + off.offset_ns as i128;
            let e = iv.end.0 as i128 + off.offset_ns as i128;
            if s < 0 {
                return Err(SyncError::UnderflowBeforeEpoch);
            }
            shifted.push(Interval::new(Timestamp(s as u64), Timestamp(e as u64)).unwrap());
        }
        out.insert(inst, IntervalSet::from_intervals(shifted));
    }
    Ok(AnnotationSet {
        per_instrument: out,
    })
}
