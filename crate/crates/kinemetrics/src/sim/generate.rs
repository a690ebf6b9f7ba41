//! Trial generation: exact tip paths, camera observations with noise and
//! burst dropout, and ground-truth metrics from the uncorrupted profile.

use std::collections::BTreeMap;

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::path::CompiledPath;
use super::{GroundTruth, InstrumentProfile, InstrumentTruth, SimConfig, SimError};
use crate::calib::ReferenceCalibration;
use crate::graph::Side;
use crate::intervals::{tracked_intervals, Interval};
use crate::metrics::{
    bimanual_metrics, motion_metrics, normalized_path_length, time_metrics, BimanualInputs,
    BimanualOptions, PairReport,
};
use crate::pose::{PoseSample, PoseTrack, RigidTransform, Timestamp, Trajectory};
use crate::sync::{apply_offset, AnnotationSet, Instrument, SyncConfidence, SyncOffset};

/// A fully generated trial, in memory.
#[derive(Debug, Clone)]
pub struct SimulatedTrial {
    pub config: SimConfig,
    /// Noisy, dropout-corrupted tool observations in each side's camera.
    pub tool_tracks: BTreeMap<Instrument, PoseTrack>,
    pub right_ref_track: PoseTrack,
    pub left_ref_track: PoseTrack,
    /// Exact (uncorrupted) global tip paths on the sample grid.
    pub exact_tips: BTreeMap<Instrument, Trajectory>,
    pub annotations_video: AnnotationSet,
    pub ground_truth: GroundTruth,
}

// Fixed RNG stream ids so every consumer draws from an independent,
// reproducible stream.
const STREAM_TOOL_NOISE: u64 = 1;
const STREAM_TOOL_DROPOUT: u64 = 101;
const STREAM_REF_RIGHT: u64 = 201;
const STREAM_REF_LEFT: u64 = 202;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn grid_timestamp(k: u64, rate_hz: f64) -> Timestamp {
    Timestamp((k as f64 * 1e9 / rate_hz).round() as u64)
}

fn body_orientation(profile: &InstrumentProfile, t: f64) -> UnitQuaternion<f64> {
    let axis = Vector3::from(profile.spin_axis);
    let norm = axis.norm();
    if norm == 0.0 || profile.spin_amplitude_rad == 0.0 {
        return UnitQuaternion::identity();
    }
    let angle =
        profile.spin_amplitude_rad * (2.0 * std::f64::consts::PI * profile.spin_rate_hz * t).sin();
    UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
}

struct NoiseStream {
    rng: ChaCha8Rng,
    dist: Option<Normal<f64>>,
}

impl NoiseStream {
    fn new(seed: u64, stream: u64, sigma: f64) -> Self {
        NoiseStream {
            rng: stream_rng(seed, stream),
            dist: (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("positive sigma")),
        }
    }

    fn perturb(&mut self, t: Vector3<f64>) -> Vector3<f64> {
        match &self.dist {
            None => t,
            Some(d) => {
                t + Vector3::new(
                    d.sample(&mut self.rng),
                    d.sample(&mut self.rng),
                    d.sample(&mut self.rng),
                )
            }
        }
    }
}

struct DropoutStream {
    rng: ChaCha8Rng,
    p_start: f64,
    burst_frames: u64,
    remaining: u64,
    protect_until_s: f64,
}

impl DropoutStream {
    fn new(cfg: &SimConfig, stream: u64) -> Self {
        let burst_frames = if cfg.dropout_rate > 0.0 {
            ((cfg.dropout_burst_ms / 1000.0) * cfg.tracker_rate_hz)
                .round()
                .max(1.0) as u64
        } else {
            1
        };
        // Expected cycle = burst + geometric visible stretch of mean 1/p;
        // solving burst / (burst + 1/p) = rate gives the start probability.
        let p_start = if cfg.dropout_rate > 0.0 {
            cfg.dropout_rate / (burst_frames as f64 * (1.0 - cfg.dropout_rate))
        } else {
            0.0
        };
        DropoutStream {
            rng: stream_rng(cfg.seed, stream),
            p_start,
            burst_frames,
            remaining: 0,
            protect_until_s: cfg.dropout_protect_until_s,
        }
    }

    fn visible(&mut self, t_s: f64) -> bool {
        // Draw every frame so the stream stays aligned across configs.
        let u: f64 = self.rng.random();
        if self.remaining > 0 {
            self.remaining -= 1;
            return false;
        }
        if t_s >= self.protect_until_s && u < self.p_start {
            self.remaining = self.burst_frames - 1;
            return false;
        }
        true
    }
}

/// Generates a complete trial from a validated config.
pub fn simulate_trial(cfg: &SimConfig) -> Result<SimulatedTrial, SimError> {
    cfg.validate()?;
    let rate = cfg.tracker_rate_hz;
    let n_frames = (cfg.duration_s * rate).round() as u64;
    if n_frames < 2 {
        return Err(SimError::InvalidConfig(
            "duration too short for the tracker rate".into(),
        ));
    }

    let cam_right = cfg.right_camera.to_transform();
    let cam_left = cfg.left_camera.to_transform();
    let left_ref = cfg.left_ref.to_transform();
    let cam_right_inv = cam_right.invert();
    let cam_left_inv = cam_left.invert();

    // Reference observations, always visible.
    let right_ref_obs = cam_right_inv;
    let left_ref_obs = cam_left_inv.compose(&left_ref);
    let mut right_ref_noise = NoiseStream::new(cfg.seed, STREAM_REF_RIGHT, cfg.noise_sigma_mm);
    let mut left_ref_noise = NoiseStream::new(cfg.seed, STREAM_REF_LEFT, cfg.noise_sigma_mm);
    let mut right_ref_samples = Vec::with_capacity(n_frames as usize);
    let mut left_ref_samples = Vec::with_capacity(n_frames as usize);
    for k in 0..n_frames {
        let t = grid_timestamp(k, rate);
        right_ref_samples.push(PoseSample {
            t,
            pose: RigidTransform::new(
                right_ref_obs.rotation,
                right_ref_noise.perturb(right_ref_obs.translation),
            ),
            visible: true,
        });
        left_ref_samples.push(PoseSample {
            t,
            pose: RigidTransform::new(
                left_ref_obs.rotation,
                left_ref_noise.perturb(left_ref_obs.translation),
            ),
            visible: true,
        });
    }
    let right_ref_track = PoseTrack::new("right-ref", "cam-right", right_ref_samples)
        .expect("grid timestamps are strictly increasing");
    let left_ref_track = PoseTrack::new("left-ref", "cam-left", left_ref_samples)
        .expect("grid timestamps are strictly increasing");

    let mut tool_tracks = BTreeMap::new();
    let mut exact_tips = BTreeMap::new();
    for (idx, profile) in cfg.instruments.iter().enumerate() {
        let path = CompiledPath::compile(profile.start_mm, &profile.segments)?;
        let tip_offset = Vector3::from(profile.tip_offset_mm);
        let (cam_inv, camera_id) = match profile.side {
            Side::Right => (&cam_right_inv, "cam-right"),
            Side::Left => (&cam_left_inv, "cam-left"),
        };
        let mut noise = NoiseStream::new(cfg.seed, STREAM_TOOL_NOISE + idx as u64, cfg.noise_sigma_mm);
        let mut dropout = DropoutStream::new(cfg, STREAM_TOOL_DROPOUT + idx as u64);

        let mut samples = Vec::with_capacity(n_frames as usize);
        let mut tips = Vec::with_capacity(n_frames as usize);
        for k in 0..n_frames {
            let ts = grid_timestamp(k, rate);
            let t_s = ts.as_secs_f64();
            let tip = path.position(t_s);
            tips.push((ts, tip));

            let rot = body_orientation(profile, t_s);
            let body_origin = tip - rot * tip_offset;
            let tool_in_global = RigidTransform::new(rot, body_origin);
            let obs = cam_inv.compose(&tool_in_global);
            let visible = dropout.visible(t_s);
            let pose = if visible {
                RigidTransform::new(obs.rotation, noise.perturb(obs.translation))
            } else {
                RigidTransform::identity()
            };
            samples.push(PoseSample {
                t: ts,
                pose,
                visible,
            });
        }
        let body_id = format!("tool-{}", profile.name);
        let track = PoseTrack::new(body_id, camera_id, samples)
            .expect("grid timestamps are strictly increasing");
        tool_tracks.insert(profile.name, track);
        exact_tips.insert(profile.name, Trajectory::new(tips));
    }

    let annotations_video = AnnotationSet::from_entries(
        cfg.instruments
            .iter()
            .flat_map(|p| {
                p.usage_video_s
                    .iter()
                    .map(|w| (p.name, Interval::from_secs(w[0], w[1]).expect("validated window")))
            })
            .collect(),
    )
    .0;

    let ground_truth = compute_ground_truth(cfg, &exact_tips, &annotations_video)?;

    Ok(SimulatedTrial {
        config: cfg.clone(),
        tool_tracks,
        right_ref_track,
        left_ref_track,
        exact_tips,
        annotations_video,
        ground_truth,
    })
}

/// Orders a pair with the dominant-hand (right-side) instrument first,
/// falling back to canonical instrument order.
pub fn ordered_pair(
    a: (Instrument, Side),
    b: (Instrument, Side),
    dominant: Side,
) -> (Instrument, Instrument) {
    if a.1 == dominant && b.1 != dominant {
        (a.0, b.0)
    } else if b.1 == dominant && a.1 != dominant {
        (b.0, a.0)
    } else if a.0 <= b.0 {
        (a.0, b.0)
    } else {
        (b.0, a.0)
    }
}

fn compute_ground_truth(
    cfg: &SimConfig,
    exact_tips: &BTreeMap<Instrument, Trajectory>,
    annotations_video: &AnnotationSet,
) -> Result<GroundTruth, SimError> {
    let offset_ns = Timestamp::from_secs_f64(cfg.contact_time_tracking_s).0 as i64
        - Timestamp::from_secs_f64(cfg.video_contact_mark_s).0 as i64;
    let offset = SyncOffset {
        offset_ns,
        contact_time_tracking: Timestamp::from_secs_f64(cfg.contact_time_tracking_s),
        confidence: SyncConfidence::Detected,
    };
    let usage_tracking = apply_offset(annotations_video, &offset)
        .map_err(|e| SimError::InvalidConfig(format!("usage schedule underflows epoch: {e}")))?;

    let mut per_instrument = BTreeMap::new();
    let mut usages = BTreeMap::new();
    let mut trackeds = BTreeMap::new();
    for profile in &cfg.instruments {
        let tip = &exact_tips[&profile.name];
        let usage = usage_tracking.usage(profile.name);
        let tracked = tracked_intervals(tip, cfg.gap_threshold_ms, cfg.tracker_rate_hz);
        let time = time_metrics(&usage, &tracked);
        let capt = usage.intersect(&tracked);
        let mut motion = motion_metrics(tip, &capt, cfg.smooth_window, cfg.tracker_rate_hz)
            .map_err(|e| {
                SimError::InvalidConfig(format!(
                    "{}: usage schedule cannot support motion metrics: {e}",
                    profile.name
                ))
            })?;
        if time.t_usage > 0.0 && time.t_capt > 0.0 {
            let (ann, cap) =
                normalized_path_length(motion.path_length, time.t_usage, time.t_capt)
                    .expect("positive durations");
            motion.npl_annotated = Some(ann);
            motion.npl_captured = Some(cap);
        }
        per_instrument.insert(profile.name, InstrumentTruth { motion, time });
        usages.insert(profile.name, usage);
        trackeds.insert(profile.name, tracked);
    }

    let trial_span = usage_tracking
        .trial_span()
        .ok_or_else(|| SimError::InvalidConfig("no usage windows configured".into()))?;

    let mut per_pair = BTreeMap::new();
    for i in 0..cfg.instruments.len() {
        for j in (i + 1)..cfg.instruments.len() {
            let (pa, pb) = (&cfg.instruments[i], &cfg.instruments[j]);
            let pair = ordered_pair((pa.name, pa.side), (pb.name, pb.side), Side::Right);
            let (first, second) = if pair.0 == pa.name { (pa, pb) } else { (pb, pa) };
            let inputs = BimanualInputs {
                traj_a: &exact_tips[&first.name],
                traj_b: &exact_tips[&second.name],
                usage_a: &usages[&first.name],
                usage_b: &usages[&second.name],
                tracked_a: &trackeds[&first.name],
                tracked_b: &trackeds[&second.name],
                trial_span,
            };
            let bm = bimanual_metrics(pair, &inputs, &BimanualOptions::default());
            let label = PairReport { pair, bimanual: bm.clone() }.label();
            per_pair.insert(label, bm);
        }
    }

    Ok(GroundTruth {
        true_sync_offset_s: offset_ns as f64 / 1e9,
        per_instrument,
        per_pair,
    })
}

/// Synthesizes pivot-calibration pose samples: rotations spread within the
/// coverage cone, translations satisfying `R_i * offset + t_i = pivot`
/// exactly before noise. The first two samples pin the coverage extremes.
pub fn synth_pivot_samples(
    offset: &Vector3<f64>,
    pivot: &Vector3<f64>,
    n: usize,
    coverage_deg: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<RigidTransform>, SimError> {
    if n < 3 {
        return Err(SimError::InvalidConfig("need at least 3 samples".into()));
    }
    if !(0.0..=180.0).contains(&coverage_deg) {
        return Err(SimError::InvalidConfig(
            "coverage must lie in [0, 180] degrees".into(),
        ));
    }
    let mut rng = stream_rng(seed, 7);
    let noise = (noise_sigma > 0.0).then(|| Normal::new(0.0, noise_sigma).expect("positive sigma"));
    let half = coverage_deg.to_radians() / 2.0;

    let random_axis = |rng: &mut ChaCha8Rng| -> nalgebra::Unit<Vector3<f64>> {
        loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() > 1e-3 {
                return nalgebra::Unit::new_normalize(v);
            }
        }
    };

    let anchor_axis = random_axis(&mut rng);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let rotation = if coverage_deg == 0.0 {
            UnitQuaternion::identity()
        } else if i == 0 {
            UnitQuaternion::from_axis_angle(&anchor_axis, -half)
        } else if i == 1 {
            UnitQuaternion::from_axis_angle(&anchor_axis, half)
        } else {
            let axis = random_axis(&mut rng);
            let angle = rng.random_range(-half..half);
            UnitQuaternion::from_axis_angle(&axis, angle)
        };
        let mut translation = pivot - rotation * offset;
        if let Some(d) = &noise {
            translation += Vector3::new(
                d.sample(&mut rng),
                d.sample(&mut rng),
                d.sample(&mut rng),
            );
        }
        samples.push(RigidTransform::new(rotation, translation));
    }
    Ok(samples)
}

/// Two-camera scene generation for transform-graph tests: one physical tool
/// observed by both cameras, with ground-truth tip path.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub seed: u64,
    pub n_samples: usize,
    pub rate_hz: f64,
    pub noise_sigma_mm: f64,
    pub tip_offset: Vector3<f64>,
    pub right_camera: RigidTransform,
    pub left_camera: RigidTransform,
    pub left_ref: RigidTransform,
}

impl SceneConfig {
    pub fn default_scene(seed: u64) -> Self {
        let axis_r = nalgebra::Unit::new_normalize(Vector3::new(0.2, -1.0, 0.3));
        let axis_l = nalgebra::Unit::new_normalize(Vector3::new(-0.4, -1.0, 0.1));
        SceneConfig {
            seed,
            n_samples: 400,
            rate_hz: 100.0,
            noise_sigma_mm: 0.0,
            tip_offset: Vector3::new(4.0, -6.0, 115.0),
            right_camera: RigidTransform::new(
                UnitQuaternion::from_axis_angle(&axis_r, 0.9),
                Vector3::new(420.0, 180.0, 610.0),
            ),
            left_camera: RigidTransform::new(
                UnitQuaternion::from_axis_angle(&axis_l, -0.8),
                Vector3::new(-450.0, 210.0, 580.0),
            ),
            left_ref: RigidTransform::new(
                UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.6),
                Vector3::new(-160.0, 35.0, 12.0),
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneData {
    pub right_tool_track: PoseTrack,
    pub right_ref_track: PoseTrack,
    pub left_tool_track: PoseTrack,
    pub left_ref_track: PoseTrack,
    pub ref_cal: ReferenceCalibration,
    pub tip_offset: Vector3<f64>,
    pub truth: Trajectory,
}

pub fn synth_two_camera_scene(cfg: &SceneConfig) -> SceneData {
    let mut rng = stream_rng(cfg.seed, 11);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let wobble_axis = nalgebra::Unit::new_normalize(Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(0.2..1.0),
    ));

    let mut noise_rt = NoiseStream::new(cfg.seed, 21, cfg.noise_sigma_mm);
    let mut noise_rr = NoiseStream::new(cfg.seed, 22, cfg.noise_sigma_mm);
    let mut noise_lt = NoiseStream::new(cfg.seed, 23, cfg.noise_sigma_mm);
    let mut noise_lr = NoiseStream::new(cfg.seed, 24, cfg.noise_sigma_mm);

    let cam_r_inv = cfg.right_camera.invert();
    let cam_l_inv = cfg.left_camera.invert();
    let right_ref_obs = cam_r_inv;
    let left_ref_obs = cam_l_inv.compose(&cfg.left_ref);

    let mut truth = Vec::with_capacity(cfg.n_samples);
    let mut rt = Vec::with_capacity(cfg.n_samples);
    let mut rr = Vec::with_capacity(cfg.n_samples);
    let mut lt = Vec::with_capacity(cfg.n_samples);
    let mut lr = Vec::with_capacity(cfg.n_samples);
    for k in 0..cfg.n_samples {
        let ts = grid_timestamp(k as u64, cfg.rate_hz);
        let t = ts.as_secs_f64();
        let tip = Vector3::new(
            25.0 * (1.3 * t + phase).cos(),
            18.0 * (0.9 * t + 0.4 * phase).sin(),
            35.0 + 9.0 * (0.6 * t).sin(),
        );
        truth.push((ts, tip));

        let rot = UnitQuaternion::from_axis_angle(&wobble_axis, 0.35 * (0.8 * t + phase).sin());
        let body_origin = tip - rot * cfg.tip_offset;
        let tool_global = RigidTransform::new(rot, body_origin);

        let obs_r = cam_r_inv.compose(&tool_global);
        let obs_l = cam_l_inv.compose(&tool_global);
        rt.push(PoseSample {
            t: ts,
            pose: RigidTransform::new(obs_r.rotation, noise_rt.perturb(obs_r.translation)),
            visible: true,
        });
        lt.push(PoseSample {
            t: ts,
            pose: RigidTransform::new(obs_l.rotation, noise_lt.perturb(obs_l.translation)),
            visible: true,
        });
        rr.push(PoseSample {
            t: ts,
            pose: RigidTransform::new(right_ref_obs.rotation, noise_rr.perturb(right_ref_obs.translation)),
            visible: true,
        });
        lr.push(PoseSample {
            t: ts,
            pose: RigidTransform::new(left_ref_obs.rotation, noise_lr.perturb(left_ref_obs.translation)),
            visible: true,
        });
    }

    SceneData {
        right_tool_track: PoseTrack::new("tool", "cam-right", rt).unwrap(),
        right_ref_track: PoseTrack::new("right-ref", "cam-right", rr).unwrap(),
        left_tool_track: PoseTrack::new("tool", "cam-left", lt).unwrap(),
        left_ref_track: PoseTrack::new("left-ref", "cam-left", lr).unwrap(),
        ref_cal: ReferenceCalibration {
            left_to_right: cfg.left_ref,
            rms_residual: 0.0,
            pair_count: 1,
        },
        tip_offset: cfg.tip_offset,
        truth: Trajectory::new(truth),
    }
}
