//! Interval-set algebra on the session timeline.
//!
//! `IntervalSet` carries the usage / tracked / captured time bookkeeping: a
//! sorted list of pairwise-disjoint intervals, normalized so that touching
//! intervals merge. All arithmetic is exact integer nanoseconds; seconds only
//! appear at presentation.

use crate::pose::{Timestamp, Trajectory, NANOS_PER_SEC};

/// Half-open-agnostic time interval with `start < end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Interval {
    /// Returns None unless `start < end`.
    pub fn new(start: Timestamp, end: Timestamp) -> Option<Self> {
        (start < end).then_some(Self { start, end })
    }

    pub fn from_secs(start_s: f64, end_s: f64) -> Option<Self> {
        Self::new(
            Timestamp::from_secs_f64(start_s),
            Timestamp::from_secs_f64(end_s),
        )
    }

    pub fn duration_ns(&self) -> u64 {
        self.end.0 - self.start.0
    }
}

/// Sorted, pairwise-disjoint, normalized set of intervals.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a normalized set from arbitrary intervals: sorts by start and
    /// merges overlapping or touching neighbours.
    pub fn from_intervals(mut intervals: Vec<Interval>) -> Self {
        intervals.sort_by_key(|iv| (iv.start, iv.end));
        let mut merged: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.start <= last.end => {
                    if iv.end > last.end {
                        last.end = iv.end;
                    }
                }
                _ => merged.push(iv),
            }
        }
        Self { intervals: merged }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total covered time in exact nanoseconds.
    pub fn duration_ns(&self) -> u64 {
        self.intervals.iter().map(Interval::duration_ns).sum()
    }

    /// Total covered time in seconds.
    pub fn duration_secs(&self) -> f64 {
        self.duration_ns() as f64 / NANOS_PER_SEC as f64
    }

    /// Standard set intersection; the result is normalized.
    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let a = self.intervals[i];
            let b = other.intervals[j];
            let start = a.start.max(b.start);
            let end = a.end.min(b.end);
            if let Some(iv) = Interval::new(start, end) {
                out.push(iv);
            }
            if a.end <= b.end {
                i += 1;
            } else {
                j += 1;
            }
        }
        // Pieces are already sorted and disjoint.
        IntervalSet { intervals: out }
    }

    /// Set union via renormalization.
    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        Self::from_intervals(all)
    }

    /// True if `t` lies inside some interval (inclusive bounds).
    pub fn contains(&self, t: Timestamp) -> bool {
        let idx = self.intervals.partition_point(|iv| iv.end < t);
        idx < self.intervals.len() && self.intervals[idx].start <= t
    }

    /// Smallest interval covering the whole set, or None when empty.
    pub fn span(&self) -> Option<Interval> {
        match (self.intervals.first(), self.intervals.last()) {
            (Some(f), Some(l)) => Interval::new(f.start, l.end),
            _ => None,
        }
    }
}

/// Intervals during which a resolved trajectory was actually tracked: one
/// interval per maximal run of consecutive samples whose inter-sample gaps
/// stay within `gap_threshold_ms`. A singleton run contributes one nominal
/// frame period (1/`nominal_rate_hz`) of duration.
pub fn tracked_intervals(
    traj: &Trajectory,
    gap_threshold_ms: f64,
    nominal_rate_hz: f64,
) -> IntervalSet {
    let gap_ns = (gap_threshold_ms * 1e6).round() as u64;
    let frame_ns = (1e9 / nominal_rate_hz).round() as u64;
    let pts = &traj.points;
    let mut intervals = Vec::new();
    let mut run_start = 0;
    for i in 0..=pts.len() {
        let boundary =
            i == pts.len() || (i > run_start && pts[i].0.abs_diff(pts[i - 1].0) > gap_ns);
        if !boundary {
            continue;
        }
        if i > run_start {
            let t0 = pts[run_start].0;
            let t1 = pts[i - 1].0;
            let end = if t1 == t0 { Timestamp(t0.0 + frame_ns) } else { t1 };
            if let Some(iv) = Interval::new(t0, end) {
                intervals.push(iv);
            }
        }
        run_start = i;
    }
    IntervalSet::from_intervals(intervals)
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(start_s: f64, end_s: f64) -> Interval {
        Interval::from_secs(start_s, end_s).unwrap()
    }

    fn set(pairs: &[(f64, f64)]) -> IntervalSet {
        IntervalSet::from_intervals(pairs.iter().map(|&(a, b)| iv(a, b)).collect())
    }

    #[test]
    fn intersect_overlapping() {
        let a = set(&[(0.0, 10.0)]);
        let b = set(&[(5.0, 15.0)]);
        assert_eq!(a.intersect(&b), set(&[(5.0, 10.0)]));
    }

    #[test]
    fn intersect_disjoint_is_empty() {
        let a = set(&[(0.0, 5.0)]);
        let b = set(&[(6.0, 9.0)]);
        assert!(a.intersect(&b).is_empty());
    }

    #[test]
    fn duration_examples() {
        assert_eq!(IntervalSet::empty().duration_secs(), 0.0);
        let s = set(&[(0.0, 10.0), (20.0, 30.0)]);
        assert_eq!(s.duration_secs(), 20.0);
    }

    #[test]
    fn touching_intervals_merge() {
        let s = set(&[(0.0, 5.0), (5.0, 10.0)]);
        assert_eq!(s.intervals().len(), 1);
        assert_eq!(s, set(&[(0.0, 10.0)]));
    }

    #[test]
    fn normalization_is_idempotent() {
        let s = set(&[(0.0, 5.0), (3.0, 8.0), (8.0, 9.0), (12.0, 13.0)]);
        let renorm = IntervalSet::from_intervals(s.intervals().to_vec());
        assert_eq!(s, renorm);
    }

    fn arb_ms_set(max_intervals: usize, horizon_ms: u64) -> impl Strategy<Value = IntervalSet> {
        proptest::collection::vec(
            (0..horizon_ms - 1).prop_flat_map(move |a| {
                (Just(a), a + 1..horizon_ms).prop_map(|(a, b)| {
                    Interval::new(Timestamp(a * 1_000_000), Timestamp(b * 1_000_000)).unwrap()
                })
            }),
            0..max_intervals,
        )
        .prop_map(IntervalSet::from_intervals)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn intersection_matches_boolean_timeline_oracle(
            a in arb_ms_set(12, 2_000),
            b in arb_ms_set(12, 2_000),
        ) {
            let got = a.intersect(&b);
            let la = oracle::to_timeline(&a, 2_000);
            let lb = oracle::to_timeline(&b, 2_000);
            let land: Vec<bool> = la.iter().zip(&lb).map(|(x, y)| *x && *y).collect();
            prop_assert_eq!(got.clone(), oracle::from_timeline(&land));
            prop_assert_eq!(got.duration_ns() / 1_000_000, oracle::duration_ms(&land));
        }

        #[test]
        fn duration_matches_direct_sum(a in arb_ms_set(12, 2_000)) {
            let direct: u64 = a.intervals().iter().map(|iv| iv.end.0 - iv.start.0).sum();
            prop_assert_eq!(a.duration_ns(), direct);
        }

        #[test]
        fn intersection_duration_bounded_by_operands(
            a in arb_ms_set(12, 2_000),
            b in arb_ms_set(12, 2_000),
        ) {
            let d = a.intersect(&b).duration_ns();
            prop_assert!(d <= a.duration_ns().min(b.duration_ns()));
        }
    }

    #[test]
    fn tracked_intervals_continuous_run() {
        // 100 Hz over [0, 10 s].
        let pts: Vec<_> = (0..=1000u64)
            .map(|i| (Timestamp(i * 10_000_000), nalgebra::Vector3::zeros()))
            .collect();
        let traj = Trajectory::new(pts);
        let set = tracked_intervals(&traj, 150.0, 100.0);
        assert_eq!(set.intervals().len(), 1);
        let d = set.duration_secs();
        assert!((d - 10.0).abs() <= 0.01 + 1e-12);
    }

    #[test]
    fn tracked_intervals_splits_on_hole() {
        let mut pts: Vec<_> = (0..=100u64)
            .map(|i| (Timestamp(i * 10_000_000), nalgebra::Vector3::zeros()))
            .collect();
        pts.extend(
            (0..=100u64).map(|i| (Timestamp(3 * NANOS_PER_SEC + i * 10_000_000), nalgebra::Vector3::zeros())),
        );
        let traj = Trajectory::new(pts);
        let set = tracked_intervals(&traj, 150.0, 100.0);
        assert_eq!(set.intervals().len(), 2);
    }

    #[test]
    fn tracked_intervals_singleton_gets_frame_period() {
        let traj = Trajectory::new(vec![(Timestamp(50_000_000), nalgebra::Vector3::zeros())]);
        let set = tracked_intervals(&traj, 150.0, 100.0);
        assert_eq!(set.duration_ns(), 10_000_000);
    }

    proptest! {
        #[test]
        fn tracked_intervals_matches_run_length_scan(
            keep in proptest::collection::vec(proptest::bool::weighted(0.8), 10..400),
        ) {
            // Randomized dropout pattern at 100 Hz.
            let step = 10_000_000u64;
            let pts: Vec<_> = keep
                .iter()
                .enumerate()
                .filter(|(_, k)| **k)
                .map(|(i, _)| (Timestamp(i as u64 * step), nalgebra::Vector3::zeros()))
                .collect();
            let traj = Trajectory::new(pts.clone());
            let got = tracked_intervals(&traj, 15.0, 100.0);

            // Brute-force run-length scan over the kept flags.
            let mut expected = Vec::new();
            let mut run: Option<(u64, u64)> = None;
            for (i, k) in keep.iter().enumerate() {
                let t = i as u64 * step;
                if *k {
                    run = match run {
                        None => Some((t, t)),
                        Some((s, _)) => Some((s, t)),
                    };
                } else if let Some((s, e)) = run.take() {
                    let end = if s == e { e + step } else { e };
                    expected.push(Interval::new(Timestamp(s), Timestamp(end)).unwrap());
                }
            }
            if let Some((s, e)) = run {
                let end = if s == e { e + step } else { e };
                expected.push(Interval::new(Timestamp(s), Timestamp(end)).unwrap());
            }
            prop_assert_eq!(got, IntervalSet::from_intervals(expected));
        }
    }
}
