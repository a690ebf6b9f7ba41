//! Motion, time, and bimanual-coordination metrics computed from resolved
//! tip trajectories and interval sets.
//!
//! Motion averages are computed only inside captured intervals (in use and
//! tracked): motion while an instrument rests on the table must not
//! contaminate skill metrics. Derivatives use successive central differences
//! on moving-average-smoothed positions and never differentiate across
//! segment boundaries.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intervals::{Interval, IntervalSet};
use crate::pose::{Timestamp, Trajectory};
use crate::sync::Instrument;

/// Timestamp mismatch allowed when pairing the two tips for the separation
/// distance.
pub const ASD_PAIRING_WINDOW_MS: f64 = 20.0;

/// Integration runs break when consecutive paired samples are further apart
/// than this.
const RUN_GAP_MS: f64 = 50.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("smoothing window must be an odd positive integer")]
    BadSmoothingWindow,
    #[error("{0} must be positive")]
    NonPositiveParameter(&'static str),
    #[error("no captured segment is long enough for the derivative stencil ({skipped} skipped)")]
    InsufficientSamples { skipped: usize },
    #[error("zero duration denominator")]
    ZeroDuration,
}

/// Motion-based metrics for one instrument over one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionMetrics {
    pub avg_velocity: f64,
    pub avg_acceleration: f64,
    pub avg_jerk: f64,
    pub path_length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub npl_annotated: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub npl_captured: Option<f64>,
    /// Captured segments skipped because they were shorter than the
    /// smoothing-plus-derivative stencil.
    pub skipped_segments: usize,
}

/// Time-based metrics for one instrument over one trial, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeMetrics {
    pub t_usage: f64,
    pub t_track: f64,
    pub t_capt: f64,
    /// `t_capt / t_usage`; None when the instrument was never annotated in
    /// use.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pct_captured: Option<f64>,
}

/// Efficiency and coordination metrics for one instrument pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimanualMetrics {
    /// Mean inter-tip distance (mm); None when no samples could be paired.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asd: Option<f64>,
    pub bit_usage: f64,
    pub bit_track: f64,
    pub bit_capt: f64,
    /// Defined only for the bipolar-aspirator pair; None otherwise or when
    /// the aspirator was never used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coord_idx: Option<f64>,
    /// Aspirator usage over the trial span; defined when the pair contains
    /// the aspirator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency_idx: Option<f64>,
}

/// Which sample window the separation distance integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AsdWindow {
    /// Simultaneously in use and tracked (default).
    #[default]
    Capture,
    /// Simultaneously tracked, regardless of annotated use.
    Track,
}

/// Denominator choice for the coordination index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoordDenominator {
    /// Total aspirator usage time; guarantees the declared [0, 1] range.
    #[default]
    AspiratorTotal,
    /// Aspirator-without-bipolar time; sensitivity-analysis alternative
    /// which can exceed 1.
    AspiratorAlone,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BimanualOptions {
    pub asd_window: AsdWindow,
    pub coord_denominator: CoordDenominator,
}

/// Per-trial bundle: identity plus per-instrument and per-pair metrics.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub participant: String,
    pub group: String,
    pub trial_index: u32,
    pub instruments: Vec<InstrumentReport>,
    pub pairs: Vec<PairReport>,
}

#[derive(Debug, Clone)]
pub struct InstrumentReport {
    pub instrument: Instrument,
    pub motion: Option<MotionMetrics>,
    pub time: TimeMetrics,
}

#[derive(Debug, Clone)]
pub struct PairReport {
    /// Dominant-hand instrument first.
    pub pair: (Instrument, Instrument),
    pub bimanual: BimanualMetrics,
}

impl PairReport {
    pub fn label(&self) -> String {
        format!("{}-{}", self.pair.0, self.pair.1)
    }
}

/// Motion metrics over the captured window of a uniformly resampled
/// trajectory.
///
/// `smooth_window` is the odd moving-average width applied to positions
/// before differentiation (1 disables smoothing). Averages are time-weighted
/// means of vector magnitudes; with a uniform grid that is the plain mean of
/// the per-sample magnitudes.
pub fn motion_metrics(
    traj: &Trajectory,
    capt: &IntervalSet,
    smooth_window: usize,
    rate_hz: f64,
) -> Result<MotionMetrics, MetricsError> {
    if smooth_window == 0 || smooth_window % 2 == 0 {
        return Err(MetricsError::BadSmoothingWindow);
    }
    if rate_hz <= 0.0 {
        return Err(MetricsError::NonPositiveParameter("rate_hz"));
    }
    let step_ns = (1e9 / rate_hz).round() as u64;
    let dt = step_ns as f64 / 1e9;
    let half = (smooth_window - 1) / 2;
    // Three nested central differences eat six samples off the smoothed
    // series; the smoothed series itself needs the full window.
    let min_len = smooth_window + 6;

    let inside: Vec<(Timestamp, Vector3<f64>)> = traj
        .points
        .iter()
        .filter(|(t, _)| capt.contains(*t))
        .copied()
        .collect();

    let mut speeds = Vec::new();
    let mut accels = Vec::new();
    let mut jerks = Vec::new();
    let mut path_length = 0.0;
    let mut skipped = 0usize;
    let mut used_any = false;

    let mut seg_start = 0usize;
    for i in 0..=inside.len() {
        let boundary =
            i == inside.len() || (i > seg_start && inside[i].0 .0 - inside[i - 1].0 .0 != step_ns);
        if !boundary {
            continue;
        }
        let seg = &inside[seg_start..i];
        seg_start = i;
        if seg.is_empty() {
            continue;
        }
        if seg.len() < min_len {
            skipped += 1;
            continue;
        }
        used_any = true;

        let smoothed: Vec<Vector3<f64>> = (half..seg.len() - half)
            .map(|j| {
                let mut acc = Vector3::zeros();
                for k in j - half..=j + half {
                    acc += seg[k].1;
                }
                acc / smooth_window as f64
            })
            .collect();

        for w in smoothed.windows(2) {
            path_length += (w[1] - w[0]).norm();
        }

        let vel = central_diff(&smoothed, dt);
        let acc = central_diff(&vel, dt);
        let jer = central_diff(&acc, dt);
        speeds.extend(vel.iter().map(Vector3::norm));
        accels.extend(acc.iter().map(Vector3::norm));
        jerks.extend(jer.iter().map(Vector3::norm));
    }

    if !used_any {
        return Err(MetricsError::InsufficientSamples { skipped });
    }

    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    Ok(MotionMetrics {
        avg_velocity: mean(&speeds),
        avg_acceleration: mean(&accels),
        avg_jerk: mean(&jerks),
        path_length,
        npl_annotated: None,
        npl_captured: None,
        skipped_segments: skipped,
    })
}

fn central_diff(series: &[Vector3<f64>], dt: f64) -> Vec<Vector3<f64>> {
    if series.len() < 3 {
        return Vec::new();
    }
    (1..series.len() - 1)
        .map(|i| (series[i + 1] - series[i - 1]) / (2.0 * dt))
        .collect()
}

/// Path length divided by the usage-time and captured-time denominators.
pub fn normalized_path_length(
    path_length: f64,
    t_usage_s: f64,
    t_capt_s: f64,
) -> Result<(f64, f64), MetricsError> {
    if t_usage_s <= 0.0 || t_capt_s <= 0.0 {
        return Err(MetricsError::ZeroDuration);
    }
    Ok((path_length / t_usage_s, path_length / t_capt_s))
}

/// Usage / tracking / captured durations; both sets must already be on the
/// tracking timeline.
pub fn time_metrics(usage: &IntervalSet, tracked: &IntervalSet) -> TimeMetrics {
    let t_usage = usage.duration_secs();
    let t_track = tracked.duration_secs();
    let t_capt = usage.intersect(tracked).duration_secs();
    let pct_captured = (t_usage > 0.0).then(|| t_capt / t_usage);
    TimeMetrics {
        t_usage,
        t_track,
        t_capt,
        pct_captured,
    }
}

/// Inputs for one instrument pair, everything on the tracking timeline.
/// Member `a` is the dominant-hand instrument.
pub struct BimanualInputs<'a> {
    pub traj_a: &'a Trajectory,
    pub traj_b: &'a Trajectory,
    pub usage_a: &'a IntervalSet,
    pub usage_b: &'a IntervalSet,
    pub tracked_a: &'a IntervalSet,
    pub tracked_b: &'a IntervalSet,
    pub trial_span: Interval,
}

/// Bimanual metrics for the pair `(a, b)`.
pub fn bimanual_metrics(
    pair: (Instrument, Instrument),
    inputs: &BimanualInputs,
    opts: &BimanualOptions,
) -> BimanualMetrics {
    let bit_usage_set = inputs.usage_a.intersect(inputs.usage_b);
    let bit_track_set = inputs.tracked_a.intersect(inputs.tracked_b);
    let bit_capt_set = bit_usage_set.intersect(&bit_track_set);

    let asd_set = match opts.asd_window {
        AsdWindow::Capture => &bit_capt_set,
        AsdWindow::Track => &bit_track_set,
    };
    let asd = separation_distance(inputs.traj_a, inputs.traj_b, asd_set);

    let aspirator_usage = match pair {
        (Instrument::Aspirator, _) => Some(inputs.usage_a),
        (_, Instrument::Aspirator) => Some(inputs.usage_b),
        _ => None,
    };
    let has_bipolar = pair.0 == Instrument::Bipolar || pair.1 == Instrument::Bipolar;

    let coord_idx = match (aspirator_usage, has_bipolar) {
        (Some(usage_asp), true) => {
            let together = bit_usage_set.duration_ns() as f64;
            let denom = match opts.coord_denominator {
                CoordDenominator::AspiratorTotal => usage_asp.duration_ns() as f64,
                CoordDenominator::AspiratorAlone => {
                    usage_asp.duration_ns() as f64 - bit_usage_set.duration_ns() as f64
                }
            };
            (denom > 0.0).then(|| together / denom)
        }
        _ => None,
    };

    let efficiency_idx = aspirator_usage.map(|usage_asp| {
        let span_set = IntervalSet::from_intervals(vec![inputs.trial_span]);
        usage_asp.intersect(&span_set).duration_ns() as f64 / inputs.trial_span.duration_ns() as f64
    });

    BimanualMetrics {
        asd,
        bit_usage: bit_usage_set.duration_secs(),
        bit_track: bit_track_set.duration_secs(),
        bit_capt: bit_capt_set.duration_secs(),
        coord_idx,
        efficiency_idx,
    }
}

/// Time-weighted mean inter-tip distance over samples inside `window`,
/// timestamps paired within 20 ms. Falls back to the unweighted mean when
/// every run is a singleton; None when nothing pairs at all.
fn separation_distance(
    traj_a: &Trajectory,
    traj_b: &Trajectory,
    window: &IntervalSet,
) -> Option<f64> {
    let pairing_ns = (ASD_PAIRING_WINDOW_MS * 1e6) as u64;
    let run_gap_ns = (RUN_GAP_MS * 1e6) as u64;

    let mut samples: Vec<(Timestamp, f64)> = Vec::new();
    for (t, pa) in &traj_a.points {
        if !window.contains(*t) {
            continue;
        }
        if let Some(pb) = crate::sync::nearest_point(traj_b, *t, pairing_ns) {
            samples.push((*t, (pa - pb).norm()));
        }
    }
    if samples.is_empty() {
        return None;
    }

    let mut weighted = 0.0;
    let mut total_dt = 0.0;
    for w in samples.windows(2) {
        let gap = w[1].0 .0 - w[0].0 .0;
        if gap <= run_gap_ns {
            let dt = gap as f64 / 1e9;
            weighted += 0.5 * (w[0].1 + w[1].1) * dt;
            total_dt += dt;
        }
    }
    if total_dt > 0.0 {
        Some(weighted / total_dt)
    } else {
        Some(samples.iter().map(|(_, d)| d).sum::<f64>() / samples.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_traj(
        rate_hz: f64,
        duration_s: f64,
        f: impl Fn(f64) -> Vector3<f64>,
    ) -> Trajectory {
        let step = (1e9 / rate_hz).round() as u64;
        let n = (duration_s * rate_hz).round() as u64;
        Trajectory::new(
            (0..=n)
                .map(|i| {
                    let t = i * step;
                    (Timestamp(t), f(t as f64 / 1e9))
                })
                .collect(),
        )
    }

    fn full_span(duration_s: f64) -> IntervalSet {
        IntervalSet::from_intervals(vec![Interval::from_secs(0.0, duration_s).unwrap()])
    }

    #[test]
    fn straight_line_velocity() {
        let traj = grid_traj(100.0, 10.0, |t| Vector3::new(10.0 * t, 0.0, 0.0));
        let m = motion_metrics(&traj, &full_span(10.0), 5, 100.0).unwrap();
        assert!((m.avg_velocity - 10.0).abs() < 1e-6, "v = {}", m.avg_velocity);
        assert!(m.avg_acceleration.abs() < 1e-6);
        assert!(m.avg_jerk.abs() < 1e-4);
        // Smoothing trims half a window at each segment end:
        // (w - 1) * dt * v = 0.4 mm here.
        assert!((m.path_length - 10.0 * 10.0).abs() < 0.5);
        assert_eq!(m.skipped_segments, 0);
    }

    #[test]
    fn circular_motion_velocity_and_acceleration() {
        // Radius 50 mm at 1 rad/s: speed 50 mm/s, acceleration 50 mm/s^2.
        let traj = grid_traj(100.0, 12.0, |t| {
            Vector3::new(50.0 * t.cos(), 50.0 * t.sin(), 0.0)
        });
        let m = motion_metrics(&traj, &full_span(12.0), 5, 100.0).unwrap();
        assert!((m.avg_velocity - 50.0).abs() / 50.0 < 0.01, "v = {}", m.avg_velocity);
        assert!(
            (m.avg_acceleration - 50.0).abs() / 50.0 < 0.01,
            "a = {}",
            m.avg_acceleration
        );
        assert!((m.avg_jerk - 50.0).abs() / 50.0 < 0.01, "j = {}", m.avg_jerk);
    }

    #[test]
    fn zero_motion_gives_zero_metrics() {
        let traj = grid_traj(100.0, 5.0, |_| Vector3::new(1.0, 2.0, 3.0));
        let m = motion_metrics(&traj, &full_span(5.0), 5, 100.0).unwrap();
        assert_eq!(m.avg_velocity, 0.0);
        assert_eq!(m.avg_acceleration, 0.0);
        assert_eq!(m.avg_jerk, 0.0);
        assert_eq!(m.path_length, 0.0);
    }

    #[test]
    fn path_length_invariant_under_rigid_motion() {
        use crate::pose::RigidTransform;
        let traj = grid_traj(100.0, 6.0, |t| Vector3::new(8.0 * t, (2.0 * t).sin() * 5.0, 0.0));
        let motion = RigidTransform::from_parts(0.8, 0.3, -0.2, 0.1, Vector3::new(30.0, -7.0, 12.0));
        let moved = Trajectory::new(
            traj.points
                .iter()
                .map(|(t, p)| (*t, motion.transform_point(p)))
                .collect(),
        );
        let a = motion_metrics(&traj, &full_span(6.0), 5, 100.0).unwrap();
        let b = motion_metrics(&moved, &full_span(6.0), 5, 100.0).unwrap();
        assert!((a.path_length - b.path_length).abs() < 1e-9);
        assert!((a.avg_velocity - b.avg_velocity).abs() < 1e-9);
    }

    #[test]
    fn time_dilation_covariance() {
        let traj = grid_traj(100.0, 6.0, |t| {
            Vector3::new(30.0 * (0.9 * t).cos(), 30.0 * (0.9 * t).sin(), 2.0 * t)
        });
        let k = 2u64;
        let dilated = Trajectory::new(
            traj.points
                .iter()
                .map(|(t, p)| (Timestamp(t.0 * k), *p))
                .collect(),
        );
        let a = motion_metrics(&traj, &full_span(6.0), 5, 100.0).unwrap();
        let b = motion_metrics(&dilated, &full_span(12.0), 5, 50.0).unwrap();
        let kf = k as f64;
        assert!((a.avg_velocity / kf - b.avg_velocity).abs() / b.avg_velocity < 1e-9);
        assert!((a.avg_acceleration / (kf * kf) - b.avg_acceleration).abs() / b.avg_acceleration < 1e-9);
        assert!((a.avg_jerk / (kf * kf * kf) - b.avg_jerk).abs() / b.avg_jerk < 1e-9);
        assert!((a.path_length - b.path_length).abs() < 1e-9);
    }

    #[test]
    fn never_differentiates_across_gap() {
        // Two separated captured windows; a naive diff across the hole would
        // see a huge velocity spike.
        let traj = grid_traj(100.0, 10.0, |t| {
            if t < 4.0 {
                Vector3::new(10.0 * t, 0.0, 0.0)
            } else {
                Vector3::new(1000.0 + 10.0 * t, 0.0, 0.0)
            }
        });
        let capt2 = IntervalSet::from_intervals(vec![
            Interval::from_secs(0.0, 3.0).unwrap(),
            Interval::from_secs(5.0, 10.0).unwrap(),
        ]);
        let m = motion_metrics(&traj, &capt2, 1, 100.0).unwrap();
        assert!((m.avg_velocity - 10.0).abs() < 1e-6, "v = {}", m.avg_velocity);
    }

    #[test]
    fn short_segments_are_skipped_and_flagged() {
        let traj = grid_traj(100.0, 10.0, |t| Vector3::new(10.0 * t, 0.0, 0.0));
        let capt = IntervalSet::from_intervals(vec![
            Interval::from_secs(0.0, 0.05).unwrap(),
            Interval::from_secs(2.0, 8.0).unwrap(),
        ]);
        let m = motion_metrics(&traj, &capt, 5, 100.0).unwrap();
        assert_eq!(m.skipped_segments, 1);
    }

    #[test]
    fn all_segments_short_is_an_error() {
        let traj = grid_traj(100.0, 1.0, |t| Vector3::new(t, 0.0, 0.0));
        let capt = IntervalSet::from_intervals(vec![Interval::from_secs(0.0, 0.03).unwrap()]);
        assert!(matches!(
            motion_metrics(&traj, &capt, 5, 100.0),
            Err(MetricsError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn npl_examples() {
        assert_eq!(normalized_path_length(300.0, 100.0, 100.0).unwrap(), (3.0, 3.0));
        let (ann, cap) = normalized_path_length(300.0, 100.0, 80.0).unwrap();
        assert_eq!((ann, cap), (3.0, 3.75));
        assert!((cap / ann - 1.25).abs() < 1e-12);
        assert_eq!(
            normalized_path_length(300.0, 0.0, 80.0),
            Err(MetricsError::ZeroDuration)
        );
    }

    fn set(pairs: &[(f64, f64)]) -> IntervalSet {
        IntervalSet::from_intervals(
            pairs
                .iter()
                .map(|&(a, b)| Interval::from_secs(a, b).unwrap())
                .collect(),
        )
    }

    #[test]
    fn time_metrics_example() {
        let m = time_metrics(&set(&[(0.0, 100.0)]), &set(&[(0.0, 80.0)]));
        assert_eq!(m.t_usage, 100.0);
        assert_eq!(m.t_track, 80.0);
        assert_eq!(m.t_capt, 80.0);
        assert_eq!(m.pct_captured, Some(0.80));
    }

    #[test]
    fn full_tracking_captures_everything() {
        let m = time_metrics(&set(&[(5.0, 50.0)]), &set(&[(0.0, 100.0)]));
        assert_eq!(m.pct_captured, Some(1.0));
        assert!(m.t_capt <= m.t_usage.min(m.t_track));
    }

    #[test]
    fn zero_usage_is_flagged_not_fatal() {
        let m = time_metrics(&IntervalSet::empty(), &set(&[(0.0, 10.0)]));
        assert_eq!(m.pct_captured, None);
        assert_eq!(m.t_capt, 0.0);
    }

    #[test]
    fn parallel_lines_asd() {
        let a = grid_traj(100.0, 10.0, |t| Vector3::new(5.0 * t, 0.0, 0.0));
        let b = grid_traj(100.0, 10.0, |t| Vector3::new(5.0 * t, 20.0, 0.0));
        let usage = set(&[(0.0, 10.0)]);
        let tracked = set(&[(0.0, 10.0)]);
        let inputs = BimanualInputs {
            traj_a: &a,
            traj_b: &b,
            usage_a: &usage,
            usage_b: &usage,
            tracked_a: &tracked,
            tracked_b: &tracked,
            trial_span: Interval::from_secs(0.0, 10.0).unwrap(),
        };
        let m = bimanual_metrics(
            (Instrument::Bipolar, Instrument::Aspirator),
            &inputs,
            &BimanualOptions::default(),
        );
        assert!((m.asd.unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn usage_overlap_and_indices() {
        let a = grid_traj(100.0, 120.0, |_| Vector3::zeros());
        let b = grid_traj(100.0, 120.0, |_| Vector3::new(10.0, 0.0, 0.0));
        let usage_bip = set(&[(0.0, 60.0)]);
        let usage_asp = set(&[(30.0, 90.0)]);
        let tracked = set(&[(0.0, 120.0)]);
        let inputs = BimanualInputs {
            traj_a: &a,
            traj_b: &b,
            usage_a: &usage_bip,
            usage_b: &usage_asp,
            tracked_a: &tracked,
            tracked_b: &tracked,
            trial_span: Interval::from_secs(0.0, 120.0).unwrap(),
        };
        let m = bimanual_metrics(
            (Instrument::Bipolar, Instrument::Aspirator),
            &inputs,
            &BimanualOptions::default(),
        );
        assert!((m.bit_usage - 30.0).abs() < 1e-9);
        assert!((m.coord_idx.unwrap() - 0.5).abs() < 1e-9);
        assert!((m.efficiency_idx.unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn asd_is_symmetric_on_common_grid() {
        let a = grid_traj(100.0, 8.0, |t| Vector3::new(4.0 * t, (t).sin() * 3.0, 0.0));
        let b = grid_traj(100.0, 8.0, |t| Vector3::new(4.0 * t, 15.0 + (1.3 * t).cos(), 1.0));
        let usage = set(&[(0.0, 8.0)]);
        let inputs_ab = BimanualInputs {
            traj_a: &a,
            traj_b: &b,
            usage_a: &usage,
            usage_b: &usage,
            tracked_a: &usage,
            tracked_b: &usage,
            trial_span: Interval::from_secs(0.0, 8.0).unwrap(),
        };
        let inputs_ba = BimanualInputs {
            traj_a: &b,
            traj_b: &a,
            usage_a: &usage,
            usage_b: &usage,
            tracked_a: &usage,
            tracked_b: &usage,
            trial_span: Interval::from_secs(0.0, 8.0).unwrap(),
        };
        let opts = BimanualOptions::default();
        let pair = (Instrument::Bipolar, Instrument::Aspirator);
        let m1 = bimanual_metrics(pair, &inputs_ab, &opts);
        let m2 = bimanual_metrics(
            (Instrument::Aspirator, Instrument::Bipolar),
            &inputs_ba,
            &opts,
        );
        assert!((m1.asd.unwrap() - m2.asd.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn zero_aspirator_usage_flags_coord() {
        let a = grid_traj(100.0, 10.0, |_| Vector3::zeros());
        let b = grid_traj(100.0, 10.0, |_| Vector3::new(5.0, 0.0, 0.0));
        let usage_bip = set(&[(0.0, 5.0)]);
        let usage_asp = IntervalSet::empty();
        let tracked = set(&[(0.0, 10.0)]);
        let inputs = BimanualInputs {
            traj_a: &a,
            traj_b: &b,
            usage_a: &usage_bip,
            usage_b: &usage_asp,
            tracked_a: &tracked,
            tracked_b: &tracked,
            trial_span: Interval::from_secs(0.0, 10.0).unwrap(),
        };
        let m = bimanual_metrics(
            (Instrument::Bipolar, Instrument::Aspirator),
            &inputs,
            &BimanualOptions::default(),
        );
        assert_eq!(m.coord_idx, None);
        assert_eq!(m.efficiency_idx, Some(0.0));
        assert_eq!(m.asd, None);
        assert!(m.bit_capt <= m.bit_usage.min(m.bit_track) + 1e-12);
    }

    #[test]
    fn indices_stay_in_unit_range() {
        let a = grid_traj(100.0, 100.0, |_| Vector3::zeros());
        let b = grid_traj(100.0, 100.0, |_| Vector3::new(5.0, 0.0, 0.0));
        let usage_bip = set(&[(0.0, 40.0), (50.0, 70.0)]);
        let usage_asp = set(&[(20.0, 95.0)]);
        let tracked = set(&[(0.0, 100.0)]);
        let inputs = BimanualInputs {
            traj_a: &a,
            traj_b: &b,
            usage_a: &usage_bip,
            usage_b: &usage_asp,
            tracked_a: &tracked,
            tracked_b: &tracked,
            trial_span: Interval::from_secs(0.0, 100.0).unwrap(),
        };
        let m = bimanual_metrics(
            (Instrument::Bipolar, Instrument::Aspirator),
            &inputs,
            &BimanualOptions::default(),
        );
        let c = m.coord_idx.unwrap();
        let e = m.efficiency_idx.unwrap();
        assert!((0.0..=1.0).contains(&c));
        assert!((0.0..=1.0).contains(&e));
    }
}
