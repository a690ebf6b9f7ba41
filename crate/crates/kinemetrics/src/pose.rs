//! SE(3) geometry, timestamps, pose sequences, and gap-aware resampling.
//!
//! Everything downstream (calibration, the transform graph, metrics) is built
//! on the types here. Rotations are stored as unit quaternions; matrices are
//! accepted at I/O boundaries only. Timestamps are integer nanoseconds since
//! the session epoch so interval arithmetic stays exact.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

/// Nanoseconds per second, as the integer timestamp base.
pub const NANOS_PER_SEC: u64 = 1_000_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PoseError {
    #[error("track has no visible samples")]
    EmptyTrack,
    #[error("timestamps must be strictly increasing (sample {index})")]
    NonMonotonicTimestamps { index: usize },
    #[error("{0} must be positive")]
    NonPositiveParameter(&'static str),
}

/// Instant on the session timeline, in nanoseconds since the session epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn from_secs_f64(secs: f64) -> Self {
        Timestamp((secs * NANOS_PER_SEC as f64).round() as u64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC as f64
    }

    /// Absolute distance to another timestamp, in nanoseconds.
    pub fn abs_diff(self, other: Timestamp) -> u64 {
        self.0.abs_diff(other.0)
    }
}

/// Rigid transform: unit-quaternion rotation plus translation in mm.
///
/// `T_B^A` conventions: a transform holding frame B's pose in frame A maps
/// B-frame coordinates into A-frame coordinates via `R * p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation,
        }
    }

    /// Builds from quaternion components (w, x, y, z), normalizing.
    pub fn from_parts(w: f64, x: f64, y: f64, z: f64, t: Vector3<f64>) -> Self {
        Self {
            rotation: UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
            translation: t,
        }
    }

    /// Orthonormal rotation matrix plus translation, for I/O boundaries.
    pub fn from_matrix(rot: &Matrix3<f64>, t: Vector3<f64>) -> Self {
        Self {
            rotation: UnitQuaternion::from_matrix(rot),
            translation: t,
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Composition `self * other`: maps a point p via `self(other(p))`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn invert(&self) -> RigidTransform {
        let inv_rot = self.rotation.inverse();
        RigidTransform {
            rotation: inv_rot,
            translation: -(inv_rot * self.translation),
        }
    }

    /// Applies the transform to a point: `R * p + t`.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Geodesic rotation angle to another transform, in radians.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }
}

/// One timestamped pose observation. When `visible` is false the pose fields
/// are present but must be ignored by consumers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample {
    pub t: Timestamp,
    pub pose: RigidTransform,
    pub visible: bool,
}

/// Time-stamped pose sequence for one rigid body seen from one camera.
///
/// Invariants enforced at construction: strictly increasing timestamps and
/// hemisphere continuity (consecutive quaternion dot products >= 0 after
/// sign fixing).
#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrack {
    pub body_id: String,
    pub camera_id: String,
    samples: Vec<PoseSample>,
}

impl PoseTrack {
    pub fn new(
        body_id: impl Into<String>,
        camera_id: impl Into<String>,
        mut samples: Vec<PoseSample>,
    ) -> Result<Self, PoseError> {
        for i in 1..samples.len() {
            if samples[i].t <= samples[i - 1].t {
                return Err(PoseError::NonMonotonicTimestamps { index: i });
            }
        }
        hemisphere_align(&mut samples);
        Ok(Self {
            body_id: body_id.into(),
            camera_id: camera_id.into(),
            samples,
        })
    }

    pub fn samples(&self) -> &[PoseSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Flips quaternion signs so consecutive visible samples stay on the same
/// hemisphere (dot product >= 0). Interpolation then always takes the short
/// great-circle arc.
fn hemisphere_align(samples: &mut [PoseSample]) {
    let mut prev: Option<Quaternion<f64>> = None;
    for s in samples.iter_mut() {
        let q = *s.pose.rotation.quaternion();
        if let Some(p) = prev {
            if p.coords.dot(&q.coords) < 0.0 {
                s.pose.rotation = UnitQuaternion::from_quaternion(-q);
            }
        }
        prev = Some(*s.pose.rotation.quaternion());
    }
}

/// Tip positions over time, expressed in the global frame (mm).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub points: Vec<(Timestamp, Vector3<f64>)>,
}

impl Trajectory {
    pub fn new(points: Vec<(Timestamp, Vector3<f64>)>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = Timestamp> + '_ {
        self.points.iter().map(|(t, _)| *t)
    }
}

/// Splits a slice of samples into maximal contiguous visible segments.
/// A segment ends where a sample is invisible or the inter-sample gap
/// exceeds `gap_ns`.
fn visible_segments(samples: &[PoseSample], gap_ns: u64) -> Vec<&[PoseSample]> {
    let mut segments = Vec::new();
    let mut start = None;
    for (i, s) in samples.iter().enumerate() {
        if !s.visible {
            if let Some(st) = start.take() {
                segments.push(&samples[st..i]);
            }
            continue;
        }
        match start {
            None => start = Some(i),
            Some(st) => {
                if samples[i].t.abs_diff(samples[i - 1].t) > gap_ns {
                    segments.push(&samples[st..i]);
                    start = Some(i);
                }
            }
        }
    }
    if let Some(st) = start {
        segments.push(&samples[st..]);
    }
    segments
}

/// Resamples a track onto a uniform grid at `rate_hz` inside each contiguous
/// visible segment. Segments split wherever the inter-sample gap exceeds
/// `gap_threshold_ms`; rotation is interpolated along the shortest
/// great-circle arc, translation linearly. No sample is extrapolated beyond
/// segment ends.
pub fn resample_uniform(
    track: &PoseTrack,
    rate_hz: f64,
    gap_threshold_ms: f64,
) -> Result<PoseTrack, PoseError> {
    if rate_hz <= 0.0 {
        return Err(PoseError::NonPositiveParameter("rate_hz"));
    }
    if gap_threshold_ms <= 0.0 {
        return Err(PoseError::NonPositiveParameter("gap_threshold_ms"));
    }
    let gap_ns = (gap_threshold_ms * 1e6).round() as u64;
    let segments = visible_segments(track.samples(), gap_ns);
    if segments.is_empty() {
        return Err(PoseError::EmptyTrack);
    }

    let mut out = Vec::new();
    for seg in segments {
        let t0 = seg[0].t;
        let t_end = seg[seg.len() - 1].t;
        let mut k: u64 = 0;
        loop {
            // Grid points computed from the segment start; rounding per point
            // avoids accumulating drift at non-integral frame periods.
            let tk = Timestamp(t0.0 + ((k as f64) * 1e9 / rate_hz).round() as u64);
            if tk > t_end {
                break;
            }
            out.push(interpolate_at(seg, tk));
            k += 1;
        }
    }
    PoseTrack::new(track.body_id.clone(), track.camera_id.clone(), out)
}

/// Interpolates a pose at time `t` inside a segment (t within segment span).
fn interpolate_at(seg: &[PoseSample], t: Timestamp) -> PoseSample {
    let idx = seg.partition_point(|s| s.t < t);
    if idx < seg.len() && seg[idx].t == t {
        return seg[idx];
    }
    // t lies strictly between seg[idx-1] and seg[idx].
    let a = &seg[idx - 1];
    let b = &seg[idx];
    let span = b.t.0 - a.t.0;
    let alpha = (t.0 - a.t.0) as f64 / span as f64;
    let rotation = a.pose.rotation.slerp(&b.pose.rotation, alpha);
    let translation = a.pose.translation.lerp(&b.pose.translation, alpha);
    PoseSample {
        t,
        pose: RigidTransform::new(rotation, translation),
        visible: true,
    }
}

/// Resamples a trajectory onto a uniform grid with the same gap-aware segment
/// rules as [`resample_uniform`]; positions interpolate linearly.
pub fn resample_trajectory(
    traj: &Trajectory,
    rate_hz: f64,
    gap_threshold_ms: f64,
) -> Result<Trajectory, PoseError> {
    if rate_hz <= 0.0 {
        return Err(PoseError::NonPositiveParameter("rate_hz"));
    }
    if gap_threshold_ms <= 0.0 {
        return Err(PoseError::NonPositiveParameter("gap_threshold_ms"));
    }
    if traj.is_empty() {
        return Err(PoseError::EmptyTrack);
    }
    let gap_ns = (gap_threshold_ms * 1e6).round() as u64;

    let mut out = Vec::new();
    let pts = &traj.points;
    let mut seg_start = 0;
    for i in 0..=pts.len() {
        let boundary = i == pts.len() || (i > seg_start && pts[i].0.abs_diff(pts[i - 1].0) > gap_ns);
        if !boundary {
            continue;
        }
        let seg = &pts[seg_start..i];
        let t0 = seg[0].0;
        let t_end = seg[seg.len() - 1].0;
        let mut k: u64 = 0;
        loop {
            let tk = Timestamp(t0.0 + ((k as f64) * 1e9 / rate_hz).round() as u64);
            if tk > t_end {
                break;
            }
            let idx = seg.partition_point(|(t, _)| *t < tk);
            if idx < seg.len() && seg[idx].0 == tk {
                out.push(seg[idx]);
            } else {
                let (ta, pa) = seg[idx - 1];
                let (tb, pb) = seg[idx];
                let alpha = (tk.0 - ta.0) as f64 / (tb.0 - ta.0) as f64;
                out.push((tk, pa.lerp(&pb, alpha)));
            }
            k += 1;
        }
        seg_start = i;
    }
    Ok(Trajectory::new(out))
}
