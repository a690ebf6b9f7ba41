//! Resolves instrument tip positions into the global (right-reference)
//! frame by composing the camera / reference / tool / tip transform chain
//! for either camera side.
//!
//! The right (primary) reference is the global frame. For a right-side
//! instrument the chain is `invert(T_RightRef^Cam) * T_Tool^Cam` applied to
//! the tip offset; the left side additionally passes through the
//! left-to-right reference calibration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::{PivotCalibration, ReferenceCalibration};
use crate::pose::{PoseSample, PoseTrack, Timestamp, Trajectory};

/// Reference poses are matched to tool samples by nearest neighbour within
/// this window; the references are static, so the temporal mismatch is
/// benign, and the bound guards against long occlusions.
pub const REF_MATCH_WINDOW_MS: f64 = 50.0;

/// Pairing window when comparing two resolutions of the same physical tool.
pub const CONSISTENCY_PAIRING_MS: f64 = 10.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("left-side chain requires a reference calibration")]
    MissingReferenceCalibration,
    #[error("tracks have no time overlap")]
    NoOverlap,
}

/// Which camera observed the instrument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Right,
    Left,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Right => "right",
            Side::Left => "left",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "right" => Some(Side::Right),
            "left" => Some(Side::Left),
            _ => None,
        }
    }
}

/// Everything needed to resolve one instrument's tip trajectory from one
/// camera: the tool and reference pose streams, the pivot calibration, and
/// (for the left side) the reference calibration.
#[derive(Debug, Clone)]
pub struct ChainSpec<'a> {
    pub side: Side,
    pub tool_track: &'a PoseTrack,
    pub ref_track: &'a PoseTrack,
    pub pivot: &'a PivotCalibration,
    pub ref_cal: Option<&'a ReferenceCalibration>,
}

fn span(track: &PoseTrack) -> Option<(Timestamp, Timestamp)> {
    let s = track.samples();
    match (s.first(), s.last()) {
        (Some(a), Some(b)) => Some((a.t, b.t)),
        _ => None,
    }
}

/// Nearest visible sample within `window_ns` of `t`, on a track sorted by
/// time.
fn nearest_visible<'a>(
    visible: &'a [PoseSample],
    t: Timestamp,
    window_ns: u64,
) -> Option<&'a PoseSample> {
    if visible.is_empty() {
        return None;
    }
    let idx = visible.partition_point(|s| s.t < t);
    let mut best: Option<(u64, usize)> = None;
    for cand in [idx.wrapping_sub(1), idx] {
        if cand < visible.len() {
            let d = visible[cand].t.abs_diff(t);
            if d <= window_ns && best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, cand));
            }
        }
    }
    best.map(|(_, i)| &visible[i])
}

/// Resolves the tip trajectory in the global frame. Output timestamps are
/// the tool-sample timestamps; samples without a visible reference pose
/// within the matching window are dropped.
pub fn resolve_tip_trajectory(spec: &ChainSpec) -> Result<Trajectory, GraphError> {
    let left_to_right = match spec.side {
        Side::Right => None,
        Side::Left => Some(
            spec.ref_cal
                .ok_or(GraphError::MissingReferenceCalibration)?
                .left_to_right,
        ),
    };

    let (tool_a, tool_b) = span(spec.tool_track).ok_or(GraphError::NoOverlap)?;
    let (ref_a, ref_b) = span(spec.ref_track).ok_or(GraphError::NoOverlap)?;
    if tool_b < ref_a || ref_b < tool_a {
        return Err(GraphError::NoOverlap);
    }

    let window_ns = (REF_MATCH_WINDOW_MS * 1e6) as u64;
    let ref_visible: Vec<PoseSample> = spec
        .ref_track
        .samples()
        .iter()
        .filter(|s| s.visible)
        .copied()
        .collect();

    let tip = spec.pivot.tip_offset;
    let mut points = Vec::new();
    for tool in spec.tool_track.samples() {
        if !tool.visible {
            continue;
        }
        let Some(ref_sample) = nearest_visible(&ref_visible, tool.t, window_ns) else {
            continue;
        };
        let tool_in_ref = ref_sample.pose.invert().compose(&tool.pose);
        let p = match &left_to_right {
            None => tool_in_ref.transform_point(&tip),
            Some(l2r) => l2r.compose(&tool_in_ref).transform_point(&tip),
        };
        points.push((tool.t, p));
    }
    Ok(Trajectory::new(points))
}

/// RMS distance in mm between two resolutions of the same physical tool,
/// over timestamps paired within 10 ms.
pub fn chain_consistency(spec_r: &ChainSpec, spec_l: &ChainSpec) -> Result<f64, GraphError> {
    let tr = resolve_tip_trajectory(spec_r)?;
    let tl = resolve_tip_trajectory(spec_l)?;
    let window_ns = (CONSISTENCY_PAIRING_MS * 1e6) as u64;

    let mut ss = 0.0;
    let mut n = 0usize;
    for (t, p) in &tr.points {
        if let Some(q) = crate::sync::nearest_point(&tl, *t, window_ns) {
            ss += (p - q).norm_squared();
            n += 1;
        }
    }
    if n == 0 {
        return Err(GraphError::NoOverlap);
    }
    Ok((ss / n as f64).sqrt())
}
