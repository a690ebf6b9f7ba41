//! End-to-end trial analysis and cohort comparison: the library core behind
//! the `analyze` and `compare` commands.
//!
//! Analysis stages: load and validate inputs, resolve tip trajectories
//! through the transform graph, synchronize the annotation timeline via the
//! contact gesture, compute interval sets, then single-instrument and
//! bimanual metrics. Any stage failure aborts with an error naming the
//! stage.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{resolve_tip_trajectory, ChainSpec, GraphError, Side};
use crate::intervals::tracked_intervals;
use crate::io::manifest::TrialManifest;
use crate::io::report::MetricRow;
use crate::io::IoError;
use crate::metrics::{
    bimanual_metrics, motion_metrics, normalized_path_length, time_metrics, BimanualInputs,
    BimanualOptions, InstrumentReport, MetricsError, MetricsReport, PairReport,
};
use crate::pose::{resample_trajectory, PoseError, PoseTrack, Timestamp, Trajectory};
use crate::sim::ordered_pair;
use crate::stats::{
    aggregate_participants, one_way_anova, tukey_hsd, AnovaTable, GroupSample, StatsError,
    TukeyComparison,
};
use crate::sync::{apply_offset, detect_contact_sync, Instrument, SyncError, SyncOffset};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("loading inputs: {0}")]
    Load(#[from] IoError),
    #[error("resolving trajectory for {instrument}: {source}")]
    Resolve {
        instrument: Instrument,
        source: GraphError,
    },
    #[error("resampling trajectory for {instrument}: {source}")]
    Resample {
        instrument: Instrument,
        source: PoseError,
    },
    #[error("synchronization: {0}")]
    Sync(#[from] SyncError),
    #[error("synchronization: {0}")]
    SyncUnavailable(String),
    #[error("metrics for {instrument}: {source}")]
    Metrics {
        instrument: Instrument,
        source: MetricsError,
    },
}

/// Tunable analysis parameters; every default is overridable from the CLI.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    /// Uniform resampling rate; also the nominal frame period for
    /// tracked-interval bookkeeping.
    pub rate_hz: f64,
    /// Gap beyond which a track or trajectory splits into segments.
    pub gap_threshold_ms: f64,
    /// Odd moving-average width applied before differentiation.
    pub smooth_window: usize,
    /// Inter-tip distance at or below which the sync gesture counts as
    /// contact.
    pub contact_threshold_mm: f64,
    /// Minimum contact hold.
    pub contact_min_hold_ms: f64,
    pub bimanual: BimanualOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            rate_hz: 100.0,
            gap_threshold_ms: 150.0,
            smooth_window: 5,
            contact_threshold_mm: 5.0,
            contact_min_hold_ms: 500.0,
            bimanual: BimanualOptions::default(),
        }
    }
}

/// Everything `analyze` produces for one trial.
#[derive(Debug, Clone)]
pub struct TrialAnalysis {
    pub report: MetricsReport,
    pub sync: SyncOffset,
    /// Instruments whose motion metrics could not be computed (all captured
    /// segments shorter than the stencil).
    pub motion_flags: Vec<(Instrument, String)>,
}

struct LoadedInstrument {
    instrument: Instrument,
    side: Side,
    raw: Trajectory,
}

fn pick_track(
    mut tracks: BTreeMap<String, PoseTrack>,
    preferred: &str,
    what: &str,
) -> Result<PoseTrack, IoError> {
    if let Some(t) = tracks.remove(preferred) {
        return Ok(t);
    }
    if tracks.len() == 1 {
        return Ok(tracks.into_values().next().unwrap());
    }
    Err(IoError::InvalidManifest {
        path: Default::default(),
        msg: format!(
            "{what}: no body named {preferred:?} and {} candidate bodies present",
            tracks.len()
        ),
    })
}

/// Runs the full per-trial pipeline on a validated manifest.
pub fn analyze_manifest(
    manifest: &TrialManifest,
    opts: &AnalysisOptions,
) -> Result<TrialAnalysis, AnalysisError> {
    let annotations_video = crate::io::annotations::read_annotations(&manifest.annotations)?;

    let ref_cal = manifest
        .reference_calibration
        .as_deref()
        .map(crate::io::artifacts::read_reference_calibration)
        .transpose()?;

    // Stage: resolve tip trajectories.
    let mut loaded = Vec::new();
    for entry in &manifest.instruments {
        let camera_id = match entry.side {
            Side::Right => "cam-right",
            Side::Left => "cam-left",
        };
        let tool_tracks = crate::io::pose_log::read_pose_log(&entry.tool_log)?
            .into_tracks(camera_id)?;
        let tool_track = pick_track(
            tool_tracks,
            &format!("tool-{}", entry.instrument),
            "tool log",
        )?;
        let ref_tracks =
            crate::io::pose_log::read_pose_log(&entry.ref_log)?.into_tracks(camera_id)?;
        let ref_name = match entry.side {
            Side::Right => "right-ref",
            Side::Left => "left-ref",
        };
        let ref_track = pick_track(ref_tracks, ref_name, "reference log")?;
        let pivot = crate::io::artifacts::read_pivot_calibration(&entry.pivot_calibration)?;

        let spec = ChainSpec {
            side: entry.side,
            tool_track: &tool_track,
            ref_track: &ref_track,
            pivot: &pivot,
            ref_cal: ref_cal.as_ref(),
        };
        let raw = resolve_tip_trajectory(&spec).map_err(|source| AnalysisError::Resolve {
            instrument: entry.instrument,
            source,
        })?;
        loaded.push(LoadedInstrument {
            instrument: entry.instrument,
            side: entry.side,
            raw,
        });
    }

    // Stage: synchronization.
    let sync = resolve_sync(manifest, opts, &loaded)?;
    let usage_tracking = apply_offset(&annotations_video, &sync)?;

    // Stage: intervals and metrics.
    let mut instruments = Vec::new();
    let mut motion_flags = Vec::new();
    let mut by_instrument = BTreeMap::new();
    for li in &loaded {
        let tracked = tracked_intervals(&li.raw, opts.gap_threshold_ms, opts.rate_hz);
        let usage = usage_tracking.usage(li.instrument);
        let time = time_metrics(&usage, &tracked);
        let capt = usage.intersect(&tracked);
        let resampled = resample_trajectory(&li.raw, opts.rate_hz, opts.gap_threshold_ms)
            .map_err(|source| AnalysisError::Resample {
                instrument: li.instrument,
                source,
            })?;
        let motion = match motion_metrics(&resampled, &capt, opts.smooth_window, opts.rate_hz) {
            Ok(mut m) => {
                if time.t_usage > 0.0 && time.t_capt > 0.0 {
                    let (ann, cap) =
                        normalized_path_length(m.path_length, time.t_usage, time.t_capt)
                            .expect("positive durations");
                    m.npl_annotated = Some(ann);
                    m.npl_captured = Some(cap);
                }
                Some(m)
            }
            Err(e @ MetricsError::InsufficientSamples { .. }) => {
                motion_flags.push((li.instrument, e.to_string()));
                None
            }
            Err(source) => {
                return Err(AnalysisError::Metrics {
                    instrument: li.instrument,
                    source,
                })
            }
        };
        instruments.push(InstrumentReport {
            instrument: li.instrument,
            motion,
            time: time.clone(),
        });
        by_instrument.insert(li.instrument, (li.side, resampled, usage, tracked));
    }

    let mut pairs = Vec::new();
    if let Some(trial_span) = usage_tracking.trial_span() {
        let insts: Vec<Instrument> = by_instrument.keys().copied().collect();
        for i in 0..insts.len() {
            for j in (i + 1)..insts.len() {
                let (side_a, ..) = &by_instrument[&insts[i]];
                let (side_b, ..) = &by_instrument[&insts[j]];
                let pair = ordered_pair(
                    (insts[i], *side_a),
                    (insts[j], *side_b),
                    manifest.dominant_hand,
                );
                let (first, second) = (pair.0, pair.1);
                let (_, traj_a, usage_a, tracked_a) = &by_instrument[&first];
                let (_, traj_b, usage_b, tracked_b) = &by_instrument[&second];
                let bimanual = bimanual_metrics(
                    pair,
                    &BimanualInputs {
                        traj_a,
                        traj_b,
                        usage_a,
                        usage_b,
                        tracked_a,
                        tracked_b,
                        trial_span,
                    },
                    &opts.bimanual,
                );
                pairs.push(PairReport { pair, bimanual });
            }
        }
    }

    Ok(TrialAnalysis {
        report: MetricsReport {
            participant: manifest.participant.clone(),
            group: manifest.group.as_str().to_string(),
            trial_index: manifest.trial_index,
            instruments,
            pairs,
        },
        sync,
        motion_flags,
    })
}

fn resolve_sync(
    manifest: &TrialManifest,
    opts: &AnalysisOptions,
    loaded: &[LoadedInstrument],
) -> Result<SyncOffset, AnalysisError> {
    if let Some(manual_s) = manifest.sync_offset_s {
        return Ok(SyncOffset::manual((manual_s * 1e9).round() as i64));
    }
    let Some(mark_s) = manifest.video_contact_mark_s else {
        return Err(AnalysisError::SyncUnavailable(
            "manifest provides neither sync_offset_s nor video_contact_mark_s".into(),
        ));
    };
    let bipolar = loaded.iter().find(|l| l.instrument == Instrument::Bipolar);
    let aspirator = loaded.iter().find(|l| l.instrument == Instrument::Aspirator);
    let (Some(bip), Some(asp)) = (bipolar, aspirator) else {
        return Err(AnalysisError::SyncUnavailable(
            "contact detection needs both bipolar and aspirator trajectories".into(),
        ));
    };
    let off = detect_contact_sync(
        &bip.raw,
        &asp.raw,
        opts.contact_threshold_mm,
        opts.contact_min_hold_ms,
        Timestamp::from_secs_f64(mark_s),
    )?;
    Ok(off)
}

/// Outcome of comparing one metric column across groups.
#[derive(Debug)]
pub enum MetricOutcome {
    Compared {
        anova: AnovaTable,
        tukey: Vec<TukeyComparison>,
    },
    Skipped {
        reason: String,
    },
}

#[derive(Debug)]
pub struct MetricComparison {
    /// `<entity>:<column>`, e.g. `scissors:t_usage_s`.
    pub metric_id: String,
    pub n_observations: usize,
    pub outcome: MetricOutcome,
}

/// Groups long-format metric rows by metric id, aggregates repeated trials
/// per participant, and runs ANOVA plus Tukey contrasts on each metric.
pub fn compare_metric_rows(
    rows: &[MetricRow],
    alpha: f64,
    metric_filter: Option<&[String]>,
) -> Result<Vec<MetricComparison>, StatsError> {
    let mut by_metric: BTreeMap<String, BTreeMap<(crate::stats::Group, String), Vec<f64>>> =
        BTreeMap::new();
    for row in rows {
        let id = format!("{}:{}", row.entity, row.metric);
        if let Some(filter) = metric_filter {
            let col_match = filter.iter().any(|f| f == &row.metric || f == &id);
            if !col_match {
                continue;
            }
        }
        by_metric
            .entry(id)
            .or_default()
            .entry((row.group, row.participant.clone()))
            .or_default()
            .push(row.value);
    }

    let mut out = Vec::new();
    for (metric_id, per_participant) in by_metric {
        let samples: Vec<GroupSample> = per_participant
            .into_iter()
            .map(|((group, participant), values)| GroupSample {
                group,
                participant,
                values,
            })
            .collect();
        let n_observations = samples.iter().map(|s| s.values.len()).sum();
        let aggregated = aggregate_participants(&samples);
        let outcome = match one_way_anova(&aggregated) {
            Ok(anova) => match tukey_hsd(&aggregated, &anova, alpha) {
                Ok(tukey) => MetricOutcome::Compared { anova, tukey },
                Err(e) => MetricOutcome::Skipped {
                    reason: e.to_string(),
                },
            },
            Err(e @ StatsError::TooFewGroups(_)) => {
                // A cohort-wide shortage of groups is fatal; a per-metric one
                // (undefined cells) is just skipped.
                if rows.is_empty() {
                    return Err(e);
                }
                MetricOutcome::Skipped {
                    reason: e.to_string(),
                }
            }
            Err(e) => MetricOutcome::Skipped {
                reason: e.to_string(),
            },
        };
        out.push(MetricComparison {
            metric_id,
            n_observations,
            outcome,
        });
    }
    if out.is_empty() {
        return Err(StatsError::TooFewGroups(0));
    }
    Ok(out)
}
