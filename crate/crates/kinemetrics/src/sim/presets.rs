//! Ready-made configurations: a single default trial and synthetic cohorts.
//!
//! Cohort presets follow the study's participant distribution (14 students,
//! 14 juniors, 11 seniors, 8 experts; three trials each) and inject
//! qualitative group effects: less scissors time, higher aspirator
//! efficiency, and tighter tip separation at higher expertise. They exist to
//! exercise the statistics pipeline on synthetic data and make no claim of
//! reproducing any cohort's numbers.

use super::{InstrumentProfile, PathSegment, SimConfig};
use crate::graph::Side;
use crate::pose::RigidTransform;
use crate::sim::PoseSpec;
use crate::stats::Group;
use crate::sync::Instrument;

use nalgebra::{UnitQuaternion, Vector3};

fn camera(axis: Vector3<f64>, angle: f64, pos: Vector3<f64>) -> PoseSpec {
    PoseSpec::new(&RigidTransform::new(
        UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle),
        pos,
    ))
}

/// One complete trial configuration: three instruments, a contact gesture
/// crossing the 5 mm threshold exactly at 3.2 s, and multi-arc work phases
/// that give non-trivial velocity, acceleration, and jerk ground truth.
pub fn default_trial(seed: u64) -> SimConfig {
    let contact = [0.0, 0.0, 40.0];
    SimConfig {
        seed,
        duration_s: 40.0,
        tracker_rate_hz: 100.0,
        noise_sigma_mm: 0.0,
        dropout_rate: 0.0,
        dropout_burst_ms: 300.0,
        dropout_protect_until_s: 4.8,
        right_camera: camera(Vector3::new(0.2, -1.0, 0.3), 0.9, Vector3::new(420.0, 180.0, 610.0)),
        left_camera: camera(Vector3::new(-0.4, -1.0, 0.1), -0.8, Vector3::new(-450.0, 210.0, 580.0)),
        left_ref: camera(Vector3::new(0.0, 0.0, 1.0), 0.6, Vector3::new(-160.0, 35.0, 12.0)),
        video_contact_mark_s: 0.0,
        contact_time_tracking_s: 3.2,
        smooth_window: 5,
        gap_threshold_ms: 150.0,
        instruments: vec![
            InstrumentProfile {
                name: Instrument::Bipolar,
                side: Side::Right,
                tip_offset_mm: [1.5, -2.0, 118.0],
                start_mm: [-30.0, 10.0, 40.0],
                usage_video_s: vec![[1.2, 14.0], [16.0, 30.0]],
                segments: vec![
                    PathSegment::Hold { duration_s: 0.69 },
                    PathSegment::Line { to_mm: contact, speed_mm_s: 15.0 },
                    PathSegment::Hold { duration_s: 1.7 },
                    PathSegment::Line { to_mm: [-12.0, -6.0, 28.0], speed_mm_s: 20.0 },
                    PathSegment::Arc {
                        center_mm: [-12.0, 0.0, 28.0],
                        normal: [0.0, 0.0, 1.0],
                        sweep_deg: 1440.0,
                        speed_mm_s: 24.0,
                    },
                    PathSegment::Line { to_mm: [-18.0, 4.0, 30.0], speed_mm_s: 20.0 },
                    PathSegment::Arc {
                        center_mm: [-14.0, 4.0, 30.0],
                        normal: [0.2, 0.0, 1.0],
                        sweep_deg: -1080.0,
                        speed_mm_s: 22.0,
                    },
                    PathSegment::Line { to_mm: [-10.0, -8.0, 26.0], speed_mm_s: 18.0 },
                    PathSegment::Arc {
                        center_mm: [-10.0, -2.0, 26.0],
                        normal: [0.0, 0.3, 1.0],
                        sweep_deg: 2160.0,
                        speed_mm_s: 20.0,
                    },
                    PathSegment::Line { to_mm: [-16.0, 2.0, 32.0], speed_mm_s: 15.0 },
                    PathSegment::Arc {
                        center_mm: [-12.0, 2.0, 32.0],
                        normal: [0.0, 0.0, 1.0],
                        sweep_deg: -1440.0,
                        speed_mm_s: 18.0,
                    },
                ],
                spin_axis: [0.3, 1.0, 0.2],
                spin_amplitude_rad: 0.25,
                spin_rate_hz: 0.31,
            },
            InstrumentProfile {
                name: Instrument::Aspirator,
                side: Side::Left,
                tip_offset_mm: [-2.5, 1.0, 132.0],
                start_mm: [30.0, 0.0, 40.0],
                usage_video_s: vec![[2.0, 13.5], [15.5, 32.0]],
                segments: vec![
                    PathSegment::Hold { duration_s: 2.2 },
                    // Crosses the 5 mm separation threshold exactly at 3.2 s:
                    // 30 mm away at 2.2 s, closing at 25 mm/s.
                    PathSegment::Line { to_mm: [0.5, 0.0, 40.0], speed_mm_s: 25.0 },
                    PathSegment::Hold { duration_s: 1.12 },
                    PathSegment::Line { to_mm: [14.0, 6.0, 26.0], speed_mm_s: 22.0 },
                    PathSegment::Arc {
                        center_mm: [14.0, 11.0, 26.0],
                        normal: [0.0, 0.0, 1.0],
                        sweep_deg: -1800.0,
                        speed_mm_s: 20.0,
                    },
                    PathSegment::Line { to_mm: [10.0, 14.0, 24.0], speed_mm_s: 20.0 },
                    PathSegment::Arc {
                        center_mm: [14.0, 14.0, 24.0],
                        normal: [0.1, 0.1, 1.0],
                        sweep_deg: 1440.0,
                        speed_mm_s: 22.0,
                    },
                    PathSegment::Line { to_mm: [16.0, 8.0, 28.0], speed_mm_s: 18.0 },
                    PathSegment::Arc {
                        center_mm: [13.0, 8.0, 28.0],
                        normal: [0.0, 0.0, 1.0],
                        sweep_deg: 2520.0,
                        speed_mm_s: 21.0,
                    },
                    PathSegment::Line { to_mm: [12.0, 12.0, 22.0], speed_mm_s: 16.0 },
                    PathSegment::Arc {
                        center_mm: [15.0, 12.0, 22.0],
                        normal: [0.0, 0.2, 1.0],
                        sweep_deg: -2160.0,
                        speed_mm_s: 19.0,
                    },
                ],
                spin_axis: [1.0, 0.2, -0.3],
                spin_amplitude_rad: 0.2,
                spin_rate_hz: 0.27,
            },
            InstrumentProfile {
                name: Instrument::Scissors,
                side: Side::Right,
                tip_offset_mm: [0.5, 0.5, 95.0],
                start_mm: [-45.0, -20.0, 50.0],
                usage_video_s: vec![[0.9, 5.9]],
                segments: vec![
                    PathSegment::Hold { duration_s: 0.4 },
                    PathSegment::Line { to_mm: [-36.0, -16.0, 42.0], speed_mm_s: 14.0 },
                    PathSegment::Arc {
                        center_mm: [-36.0, -12.0, 42.0],
                        normal: [0.0, 0.0, 1.0],
                        sweep_deg: 1080.0,
                        speed_mm_s: 16.0,
                    },
                    PathSegment::Line { to_mm: [-40.0, -18.0, 46.0], speed_mm_s: 10.0 },
                ],
                spin_axis: [0.1, 1.0, 0.4],
                spin_amplitude_rad: 0.3,
                spin_rate_hz: 0.23,
            },
        ],
    }
}

/// One member of a synthetic cohort.
#[derive(Debug, Clone)]
pub struct CohortTrial {
    pub participant: String,
    pub group: Group,
    pub trial_index: u32,
    pub config: SimConfig,
}

/// Table-style participant distribution: 14 / 14 / 11 / 8 across the four
/// groups.
pub const COHORT_DISTRIBUTION: [(Group, usize); 4] = [
    (Group::Student, 14),
    (Group::Junior, 14),
    (Group::Senior, 11),
    (Group::Expert, 8),
];

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Deterministic pseudo-uniform in [-1, 1] derived from a key.
fn jitter(key: u64) -> f64 {
    (splitmix64(key) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

struct GroupEffects {
    scissors_usage_s: f64,
    aspirator_extra_s: f64,
    separation_extra_mm: f64,
}

fn group_effects(group: Group, enabled: bool) -> GroupEffects {
    if !enabled {
        return GroupEffects {
            scissors_usage_s: 5.0,
            aspirator_extra_s: 0.0,
            separation_extra_mm: 4.0,
        };
    }
    match group {
        Group::Student => GroupEffects {
            scissors_usage_s: 8.0,
            aspirator_extra_s: -4.0,
            separation_extra_mm: 12.0,
        },
        Group::Junior => GroupEffects {
            scissors_usage_s: 6.5,
            aspirator_extra_s: -2.0,
            separation_extra_mm: 7.0,
        },
        Group::Senior => GroupEffects {
            scissors_usage_s: 4.5,
            aspirator_extra_s: 1.0,
            separation_extra_mm: 2.0,
        },
        Group::Expert => GroupEffects {
            scissors_usage_s: 3.5,
            aspirator_extra_s: 2.0,
            separation_extra_mm: 0.0,
        },
    }
}

fn cohort_trial_config(
    base_seed: u64,
    group: Group,
    group_idx: usize,
    participant_idx: usize,
    trial_idx: u32,
    effects_enabled: bool,
) -> SimConfig {
    let key = splitmix64(base_seed)
        ^ splitmix64(group_idx as u64 * 1_000_003)
        ^ splitmix64(participant_idx as u64 * 7_919 + 13)
        ^ splitmix64(trial_idx as u64 * 104_729 + 101);
    let mut cfg = default_trial(splitmix64(key));
    cfg.noise_sigma_mm = 0.1;
    cfg.dropout_rate = 0.05;

    let fx = group_effects(group, effects_enabled);
    // Participant-level effect plus trial-level variation, both seeded.
    let participant_key = splitmix64(base_seed) ^ splitmix64((group_idx * 100 + participant_idx) as u64);
    let scissors = (fx.scissors_usage_s + 1.0 * jitter(participant_key) + 0.5 * jitter(key ^ 1))
        .clamp(1.5, 12.0);
    let asp_extra = fx.aspirator_extra_s + 1.5 * jitter(participant_key ^ 2) + 0.8 * jitter(key ^ 3);
    let sep_extra = (fx.separation_extra_mm
        + 2.0 * jitter(participant_key ^ 4)
        + 1.0 * jitter(key ^ 5))
    .max(0.0);

    for inst in &mut cfg.instruments {
        match inst.name {
            Instrument::Scissors => {
                inst.usage_video_s = vec![[0.9, 0.9 + scissors]];
            }
            Instrument::Aspirator => {
                let end = (32.0 + asp_extra).clamp(20.0, 36.0);
                inst.usage_video_s = vec![[2.0, 13.5], [15.5, end]];
                // Shift the work-phase geometry away from the bipolar zone;
                // the contact approach (first three segments) stays put.
                for seg in inst.segments.iter_mut().skip(3) {
                    match seg {
                        PathSegment::Line { to_mm, .. } => to_mm[0] += sep_extra,
                        PathSegment::Arc { center_mm, .. } => center_mm[0] += sep_extra,
                        PathSegment::Hold { .. } => {}
                    }
                }
            }
            Instrument::Bipolar => {}
        }
    }
    cfg
}

fn build_cohort(base_seed: u64, trials_per_participant: u32, effects: bool) -> Vec<CohortTrial> {
    let mut out = Vec::new();
    let mut participant_no = 0usize;
    for (group_idx, (group, count)) in COHORT_DISTRIBUTION.iter().enumerate() {
        for p in 0..*count {
            participant_no += 1;
            let participant = format!("P{participant_no:02}");
            for trial_idx in 1..=trials_per_participant {
                out.push(CohortTrial {
                    participant: participant.clone(),
                    group: *group,
                    trial_index: trial_idx,
                    config: cohort_trial_config(base_seed, *group, group_idx, p, trial_idx, effects),
                });
            }
        }
    }
    out
}

/// Full 47-participant, 3-trial cohort (141 trials) with group effects.
pub fn cohort_47x3(base_seed: u64, trials_per_participant: u32) -> Vec<CohortTrial> {
    build_cohort(base_seed, trials_per_participant, true)
}

/// Same cohort shape with group effects disabled; every group draws from
/// one distribution.
pub fn null_cohort(base_seed: u64, trials_per_participant: u32) -> Vec<CohortTrial> {
    build_cohort(base_seed, trials_per_participant, false)
}
