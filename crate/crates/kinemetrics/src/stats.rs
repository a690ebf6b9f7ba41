//! Group comparison of metric tables: per-participant aggregation, one-way
//! fixed-effects ANOVA, and Tukey-Kramer pairwise contrasts with adjusted
//! p-values and confidence intervals.
//!
//! Repeated trials are collapsed to the participant mean before the ANOVA;
//! with a balanced trials-per-participant design this coincides with the
//! fixed-effect test of a mixed model up to degrees-of-freedom bookkeeping.
//! The studentized-range distribution behind the Tukey adjustment is
//! evaluated in-crate by nested quadrature since no common crate provides
//! it.

use std::collections::BTreeMap;
use std::fmt;

use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least two groups with two participants each (got {0})")]
    TooFewGroups(usize),
    #[error("within-group variance is zero while group means differ; p -> 0")]
    DegenerateVariance,
    #[error("alpha must lie in (0, 1)")]
    BadAlpha,
}

/// Expertise groups, ordered from least to most training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Student,
    Junior,
    Senior,
    Expert,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Student, Group::Junior, Group::Senior, Group::Expert];

    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Student => "Student",
            Group::Junior => "Junior",
            Group::Senior => "Senior",
            Group::Expert => "Expert",
        }
    }

    pub fn parse(s: &str) -> Option<Group> {
        match s {
            "Student" => Some(Group::Student),
            "Junior" => Some(Group::Junior),
            "Senior" => Some(Group::Senior),
            "Expert" => Some(Group::Expert),
            _ => None,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-trial metric values for one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    pub group: Group,
    pub participant: String,
    pub values: Vec<f64>,
}

/// One-way ANOVA decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaTable {
    pub ss_between: f64,
    pub ss_within: f64,
    pub ss_total: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ms_between: f64,
    pub ms_within: f64,
    pub f_stat: f64,
    pub p: f64,
}

/// One Tukey-Kramer pairwise contrast.
#[derive(Debug, Clone, PartialEq)]
pub struct TukeyComparison {
    pub pair: (Group, Group),
    pub mean_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub q_stat: f64,
    pub p_adj: f64,
}

/// Collapses repeated trials so each participant contributes exactly one
/// value (the arithmetic mean of their trials). Group labels are preserved;
/// multiple entries for one participant are pooled first.
pub fn aggregate_participants(samples: &[GroupSample]) -> Vec<GroupSample> {
    let mut pooled: BTreeMap<(Group, String), Vec<f64>> = BTreeMap::new();
    for s in samples {
        pooled
            .entry((s.group, s.participant.clone()))
            .or_default()
            .extend_from_slice(&s.values);
    }
    pooled
        .into_iter()
        .filter(|(_, vals)| !vals.is_empty())
        .map(|((group, participant), vals)| {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            GroupSample {
                group,
                participant,
                values: vec![mean],
            }
        })
        .collect()
}

struct GroupStats {
    group: Group,
    n: usize,
    mean: f64,
}

fn group_stats(samples: &[GroupSample]) -> (Vec<GroupStats>, Vec<(Group, f64)>) {
    let mut by_group: BTreeMap<Group, Vec<f64>> = BTreeMap::new();
    let mut flat = Vec::new();
    for s in samples {
        for v in &s.values {
            by_group.entry(s.group).or_default().push(*v);
            flat.push((s.group, *v));
        }
    }
    let stats = by_group
        .into_iter()
        .map(|(group, vals)| GroupStats {
            group,
            n: vals.len(),
            mean: vals.iter().sum::<f64>() / vals.len() as f64,
        })
        .collect();
    (stats, flat)
}

/// Classical fixed-effects one-way ANOVA over aggregated samples (one value
/// per participant).
pub fn one_way_anova(samples: &[GroupSample]) -> Result<AnovaTable, StatsError> {
    let (stats, flat) = group_stats(samples);
    let usable = stats.iter().filter(|g| g.n >= 2).count();
    if stats.len() < 2 || usable < stats.len() {
        return Err(StatsError::TooFewGroups(stats.len()));
    }
    let n_total: usize = stats.iter().map(|g| g.n).sum();
    let df_between = stats.len() - 1;
    let df_within = n_total - stats.len();
    if df_within < 1 {
        return Err(StatsError::TooFewGroups(stats.len()));
    }

    let grand = flat.iter().map(|(_, v)| v).sum::<f64>() / n_total as f64;
    let ss_between: f64 = stats
        .iter()
        .map(|g| g.n as f64 * (g.mean - grand).powi(2))
        .sum();
    let mut ss_within = 0.0;
    for (group, v) in &flat {
        let mean = stats.iter().find(|g| g.group == *group).unwrap().mean;
        ss_within += (v - mean).powi(2);
    }
    let ss_total = ss_between + ss_within;

    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;

    // Scale-aware zero test: sums of squares below fp noise of the data
    // magnitude count as zero.
    let scale = flat.iter().map(|(_, v)| v.abs()).fold(0.0f64, f64::max);
    let eps = (scale * scale).max(1.0) * 1e-14;

    let (f_stat, p) = if ss_within <= eps {
        if ss_between <= eps {
            (0.0, 1.0)
        } else {
            return Err(StatsError::DegenerateVariance);
        }
    } else {
        let f_stat = ms_between / ms_within;
        let dist = FisherSnedecor::new(df_between as f64, df_within as f64)
            .expect("positive degrees of freedom");
        (f_stat, dist.sf(f_stat))
    };

    Ok(AnovaTable {
        ss_between,
        ss_within,
        ss_total,
        df_between,
        df_within,
        ms_between,
        ms_within,
        f_stat,
        p,
    })
}

/// Tukey-Kramer pairwise contrasts over the same aggregated samples the
/// ANOVA saw. Pairs are ordered by increasing expertise.
pub fn tukey_hsd(
    samples: &[GroupSample],
    anova: &AnovaTable,
    alpha: f64,
) -> Result<Vec<TukeyComparison>, StatsError> {
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(StatsError::BadAlpha);
    }
    let (stats, _) = group_stats(samples);
    let k = stats.len();
    if k < 2 {
        return Err(StatsError::TooFewGroups(k));
    }
    if anova.ms_within <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let df = anova.df_within;
    let q_crit = studentized_range_quantile(1.0 - alpha, k, df);

    let mut out = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let (a, b) = (&stats[i], &stats[j]);
            let mean_diff = a.mean - b.mean;
            let se = (anova.ms_within / 2.0 * (1.0 / a.n as f64 + 1.0 / b.n as f64)).sqrt();
            let q_stat = mean_diff.abs() / se;
            let p_adj = (1.0 - studentized_range_cdf(q_stat, k, df)).clamp(0.0, 1.0);
            out.push(TukeyComparison {
                pair: (a.group, b.group),
                mean_diff,
                ci_low: mean_diff - q_crit * se,
                ci_high: mean_diff + q_crit * se,
                q_stat,
                p_adj,
            });
        }
    }
    Ok(out)
}

// Gauss-Legendre nodes and weights, order 16, on [-1, 1].
const GL16_NODES: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003_0,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL16_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_533_9,
    0.095_158_511_682_492_8,
    0.062_253_523_938_647_9,
    0.027_152_459_411_754_1,
];

/// 16-point Gauss-Legendre on [a, b].
fn gl16<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL16_NODES.iter().zip(GL16_WEIGHTS.iter()) {
        acc += w * (f(c + h * x) + f(c - h * x));
    }
    acc * h
}

/// Composite GL-16 over `panels` equal panels.
fn gl16_composite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| gl16(f, a + i as f64 * h, a + (i + 1) as f64 * h))
        .sum()
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// CDF of the range of k independent standard normals.
fn normal_range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let f = |z: f64| {
        let span = normal_cdf(z) - normal_cdf(z - w);
        normal_pdf(z) * span.powi(k as i32 - 1)
    };
    (k as f64 * gl16_composite(&f, -8.5, 8.5, 6)).clamp(0.0, 1.0)
}

/// Log-density of s = chi_nu / sqrt(nu).
fn chi_scale_log_pdf(s: f64, nu: f64) -> f64 {
    0.5 * nu * nu.ln() + (nu - 1.0) * s.ln() - 0.5 * nu * s * s
        - (0.5 * nu - 1.0) * std::f64::consts::LN_2
        - ln_gamma(0.5 * nu)
}

/// Recursive adaptive Simpson with absolute tolerance.
fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson seeded with a uniform panel split so narrow features
/// (the chi scale density concentrates near 1) cannot slip between the
/// initial probe points.
fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    let panel_tol = tol / PANELS as f64;
    (0..PANELS)
        .map(|i| {
            let pa = a + i as f64 * h;
            let pb = pa + h;
            let m = 0.5 * (pa + pb);
            let fa = f(pa);
            let fm = f(m);
            let fb = f(pb);
            let whole = (pb - pa) / 6.0 * (fa + 4.0 * fm + fb);
            adaptive_simpson(f, pa, pb, fa, fm, fb, whole, panel_tol, 36)
        })
        .sum()
}

/// CDF of the studentized range Q with `k` groups and `df` within degrees of
/// freedom: the probability that the range of k normal means, divided by an
/// independent chi-based scale estimate, stays at or below `q`.
///
/// Absolute error is held below 1e-6; the function is monotone
/// non-decreasing in q up to quadrature noise well under that bound.
pub fn studentized_range_cdf(q: f64, k: usize, df: usize) -> f64 {
    assert!(k >= 2, "need at least two groups");
    assert!(df >= 1, "need at least one degree of freedom");
    if q <= 0.0 {
        return 0.0;
    }
    let nu = df as f64;
    let integrand = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let logp = chi_scale_log_pdf(s, nu);
        if logp < -700.0 {
            return 0.0;
        }
        logp.exp() * normal_range_cdf(q * s, k)
    };
    let hi = 1.0 + 10.0 / nu.sqrt();
    let lo = (1.0 - 10.0 / nu.sqrt()).max(0.0);
    integrate_adaptive(&integrand, lo, hi, 1e-9).clamp(0.0, 1.0)
}

/// Inverse of [`studentized_range_cdf`] in q, via bisection.
pub fn studentized_range_quantile(p: f64, k: usize, df: usize) -> f64 {
    assert!((0.0..1.0).contains(&p));
    let (mut lo, mut hi) = (0.0f64, 4.0f64);
    while studentized_range_cdf(hi, k, df) < p {
        hi *= 2.0;
        if hi > 1e4 {
            break;
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if studentized_range_cdf(mid, k, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn gs(group: Group, participant: &str, values: &[f64]) -> GroupSample {
        GroupSample {
            group,
            participant: participant.to_string(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn aggregation_takes_trial_means() {
        let agg = aggregate_participants(&[gs(Group::Student, "p1", &[2.0, 4.0, 6.0])]);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].values, vec![4.0]);
    }

    #[test]
    fn aggregation_keeps_single_trials() {
        let agg = aggregate_participants(&[gs(Group::Expert, "p9", &[7.5])]);
        assert_eq!(agg[0].values, vec![7.5]);
    }

    #[test]
    fn aggregation_matches_hand_computation() {
        let cohort = vec![
            gs(Group::Student, "s1", &[1.0, 2.0, 3.0]),
            gs(Group::Student, "s2", &[4.0, 5.0]),
            gs(Group::Junior, "j1", &[10.0, 20.0, 30.0]),
            gs(Group::Junior, "j1", &[40.0]),
        ];
        let agg = aggregate_participants(&cohort);
        assert_eq!(agg.len(), 3);
        // Spreadsheet-style expected values.
        assert_eq!(agg[0].values, vec![2.0]); // (1+2+3)/3
        assert_eq!(agg[1].values, vec![4.5]); // (4+5)/2
        assert_eq!(agg[2].values, vec![25.0]); // (10+20+30+40)/4
    }

    fn toy_groups() -> Vec<GroupSample> {
        // A=[1,2,3], B=[2,3,4], C=[3,4,5]: hand-computed SSB = 6, SSW = 6,
        // df = (2, 6), F = 3.0.
        let mut v = Vec::new();
        for (g, vals) in [
            (Group::Student, [1.0, 2.0, 3.0]),
            (Group::Junior, [2.0, 3.0, 4.0]),
            (Group::Senior, [3.0, 4.0, 5.0]),
        ] {
            for (i, x) in vals.iter().enumerate() {
                v.push(gs(g, &format!("{g}-{i}"), &[*x]));
            }
        }
        v
    }

    #[test]
    fn toy_dataset_f_statistic() {
        let t = one_way_anova(&toy_groups()).unwrap();
        assert!((t.ss_between - 6.0).abs() < 1e-12);
        assert!((t.ss_within - 6.0).abs() < 1e-12);
        assert_eq!((t.df_between, t.df_within), (2, 6));
        assert!((t.f_stat - 3.0).abs() < 1e-9);
        assert!((t.ss_total - t.ss_between - t.ss_within).abs() < 1e-9 * t.ss_total.max(1.0));
    }

    #[test]
    fn identical_groups_give_f_zero_p_one() {
        let mut v = Vec::new();
        for g in [Group::Student, Group::Junior] {
            for i in 0..4 {
                v.push(gs(g, &format!("{g}-{i}"), &[5.0]));
            }
        }
        let t = one_way_anova(&v).unwrap();
        assert_eq!(t.f_stat, 0.0);
        assert_eq!(t.p, 1.0);
    }

    #[test]
    fn zero_variance_with_differing_means_is_degenerate() {
        let mut v = Vec::new();
        for i in 0..3 {
            v.push(gs(Group::Student, &format!("s{i}"), &[1.0]));
            v.push(gs(Group::Expert, &format!("e{i}"), &[2.0]));
        }
        assert_eq!(one_way_anova(&v), Err(StatsError::DegenerateVariance));
    }

    #[test]
    fn single_group_is_rejected() {
        let v = vec![
            gs(Group::Student, "a", &[1.0]),
            gs(Group::Student, "b", &[2.0]),
        ];
        assert_eq!(one_way_anova(&v), Err(StatsError::TooFewGroups(1)));
    }

    #[test]
    fn two_group_f_equals_squared_t() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let n1 = rng.random_range(3..10);
            let n2 = rng.random_range(3..10);
            let a: Vec<f64> = (0..n1).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..n2).map(|_| rng.random_range(-2.0..8.0)).collect();
            let mut v = Vec::new();
            for (i, x) in a.iter().enumerate() {
                v.push(gs(Group::Student, &format!("a{i}"), &[*x]));
            }
            for (i, x) in b.iter().enumerate() {
                v.push(gs(Group::Expert, &format!("b{i}"), &[*x]));
            }
            let t = one_way_anova(&v).unwrap();

            // Pooled-variance two-sample t statistic.
            let m1 = a.iter().sum::<f64>() / n1 as f64;
            let m2 = b.iter().sum::<f64>() / n2 as f64;
            let s1: f64 = a.iter().map(|x| (x - m1).powi(2)).sum();
            let s2: f64 = b.iter().map(|x| (x - m2).powi(2)).sum();
            let sp2 = (s1 + s2) / (n1 + n2 - 2) as f64;
            let tt = (m1 - m2) / (sp2 * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
            assert!(
                (t.f_stat - tt * tt).abs() < 1e-9 * tt.powi(2).max(1.0),
                "F {} vs t^2 {}",
                t.f_stat,
                tt * tt
            );
        }
    }

    #[test]
    fn f_invariant_under_shift_and_scale() {
        let base = toy_groups();
        let t0 = one_way_anova(&base).unwrap();
        let shifted: Vec<GroupSample> = base
            .iter()
            .map(|s| GroupSample {
                group: s.group,
                participant: s.participant.clone(),
                values: s.values.iter().map(|v| v + 17.5).collect(),
            })
            .collect();
        let scaled: Vec<GroupSample> = base
            .iter()
            .map(|s| GroupSample {
                group: s.group,
                participant: s.participant.clone(),
                values: s.values.iter().map(|v| v * 3.25).collect(),
            })
            .collect();
        let ts = one_way_anova(&shifted).unwrap();
        let tc = one_way_anova(&scaled).unwrap();
        assert!((t0.f_stat - ts.f_stat).abs() < 1e-9);
        assert!((t0.f_stat - tc.f_stat).abs() < 1e-9);
    }

    #[test]
    fn ss_decomposition_exact_on_random_data() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mut v = Vec::new();
            for g in [Group::Student, Group::Junior, Group::Senior, Group::Expert] {
                let n = rng.random_range(2..12);
                for i in 0..n {
                    v.push(gs(g, &format!("{g}-{i}"), &[rng.random_range(-100.0..100.0)]));
                }
            }
            let t = one_way_anova(&v).unwrap();
            let direct_total: f64 = {
                let flat: Vec<f64> = v.iter().flat_map(|s| s.values.clone()).collect();
                let grand = flat.iter().sum::<f64>() / flat.len() as f64;
                flat.iter().map(|x| (x - grand).powi(2)).sum()
            };
            assert!((t.ss_total - direct_total).abs() < 1e-9 * direct_total.max(1.0));
            assert!(
                (t.ss_total - t.ss_between - t.ss_within).abs() < 1e-9 * t.ss_total.max(1.0)
            );
        }
    }

    #[test]
    fn gl16_integrates_known_functions() {
        let poly = |x: f64| x * x;
        assert!((gl16(&poly, 0.0, 1.0) - 1.0 / 3.0).abs() < 1e-14);
        let gauss = |z: f64| normal_pdf(z);
        assert!((gl16_composite(&gauss, -8.5, 8.5, 6) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn srange_cdf_limits() {
        assert_eq!(studentized_range_cdf(0.0, 3, 6), 0.0);
        // The exact tail at (k=3, df=6) decays like 4.5 (c/q)^6, so the
        // 1e-9 bound needs q beyond ~400; q = 1000 sits safely past it.
        assert!(studentized_range_cdf(1000.0, 3, 6) >= 1.0 - 1e-9);
        assert!(studentized_range_cdf(100.0, 3, 60) >= 1.0 - 1e-9);
        // At q = 100 the df = 6 tail is small but real.
        let p = studentized_range_cdf(100.0, 3, 6);
        assert!(p > 1.0 - 1e-6 && p < 1.0);
    }

    #[test]
    fn srange_cdf_at_tabulated_critical_value() {
        // Standard studentized-range tables give q_0.05(k=3, df=6) = 4.339.
        let p = studentized_range_cdf(4.339, 3, 6);
        assert!((p - 0.95).abs() < 0.002, "p = {p}");
    }

    #[test]
    fn srange_quantile_inverts_cdf() {
        let q = studentized_range_quantile(0.95, 3, 6);
        assert!((q - 4.339).abs() < 0.01, "q = {q}");
        let q2 = studentized_range_quantile(0.95, 4, 20);
        // Tabulated q_0.05(4, 20) = 3.958.
        assert!((q2 - 3.958).abs() < 0.01, "q2 = {q2}");
    }

    #[test]
    fn srange_cdf_monotone_in_q_and_df() {
        let mut prev = 0.0;
        for i in 0..30 {
            let q = i as f64 * 0.4;
            let p = studentized_range_cdf(q, 4, 8);
            assert!(p >= prev - 1e-7, "not monotone at q={q}");
            prev = p;
        }
        // At fixed q above the central mass, the CDF grows with df.
        let mut prev_df = 0.0;
        for df in [2usize, 4, 8, 16, 32, 64] {
            let p = studentized_range_cdf(4.0, 3, df);
            assert!(p >= prev_df - 1e-7, "not monotone at df={df}");
            prev_df = p;
        }
    }

    #[test]
    fn tukey_identical_means_have_high_p() {
        let mut v = Vec::new();
        for g in [Group::Student, Group::Junior] {
            for (i, x) in [1.0, 2.0, 3.0].iter().enumerate() {
                v.push(gs(g, &format!("{g}-{i}"), &[*x]));
            }
        }
        let anova = one_way_anova(&v).unwrap();
        let cmp = tukey_hsd(&v, &anova, 0.05).unwrap();
        assert_eq!(cmp.len(), 1);
        assert!(cmp[0].mean_diff.abs() < 1e-12);
        assert!(cmp[0].p_adj > 0.99);
        assert!((cmp[0].ci_low + cmp[0].ci_high).abs() < 1e-9);
    }

    #[test]
    fn tukey_toy_dataset_pairs() {
        let v = toy_groups();
        let anova = one_way_anova(&v).unwrap();
        let cmp = tukey_hsd(&v, &anova, 0.05).unwrap();
        assert_eq!(cmp.len(), 3);
        for c in &cmp {
            assert!(c.ci_low <= c.mean_diff && c.mean_diff <= c.ci_high);
            assert!((0.0..=1.0).contains(&c.p_adj));
        }
        // Student vs Senior has |diff| = 2, the largest, hence smallest p.
        let extreme = cmp
            .iter()
            .find(|c| c.pair == (Group::Student, Group::Senior))
            .unwrap();
        for c in &cmp {
            assert!(extreme.p_adj <= c.p_adj + 1e-12);
        }
    }

    #[test]
    fn tukey_ci_excludes_zero_iff_significant_equal_n() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
        for _ in 0..10 {
            let mut v = Vec::new();
            for (gi, g) in [Group::Student, Group::Junior, Group::Senior].iter().enumerate() {
                for i in 0..5 {
                    let x = rng.random_range(0.0..4.0) + gi as f64 * rng.random_range(0.0..2.0);
                    v.push(gs(*g, &format!("{g}-{i}"), &[x]));
                }
            }
            let anova = match one_way_anova(&v) {
                Ok(t) => t,
                Err(_) => continue,
            };
            for c in tukey_hsd(&v, &anova, 0.05).unwrap() {
                let excludes_zero = c.ci_low > 0.0 || c.ci_high < 0.0;
                let significant = c.p_adj < 0.05;
                assert_eq!(excludes_zero, significant, "pair {:?}", c.pair);
            }
        }
    }

    #[test]
    fn tukey_p_monotone_in_mean_diff_equal_n() {
        // Fixed ms_within, equal group sizes, growing separation.
        let make = |delta: f64| {
            let mut v = Vec::new();
            for (gi, g) in [Group::Student, Group::Junior].iter().enumerate() {
                for (i, e) in [-1.0, 0.0, 1.0].iter().enumerate() {
                    v.push(gs(*g, &format!("{g}-{i}"), &[gi as f64 * delta + e]));
                }
            }
            v
        };
        let mut prev_p = 1.1;
        for delta in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let v = make(delta);
            let anova = one_way_anova(&v).unwrap();
            let cmp = tukey_hsd(&v, &anova, 0.05).unwrap();
            assert!(cmp[0].p_adj <= prev_p + 1e-9);
            prev_p = cmp[0].p_adj;
        }
    }

    // Independent oracle: direct 2-D tensor quadrature of the
    // studentized-range probability over (z, s), with its own erfc.
    mod oracle {
        /// Cody-style rational erfc, independent of statrs.
        fn erfc_ind(x: f64) -> f64 {
            if x < 0.0 {
                return 2.0 - erfc_ind(-x);
            }
            // Abramowitz & Stegun 7.1.26-style with extra precision via
            // continued fraction for large x, series for small x.
            if x < 2.0 {
                // erf via Taylor series of exp(-x^2) * sum.
                let mut term = 2.0 * x / std::f64::consts::PI.sqrt();
                let mut sum = term;
                let x2 = x * x;
                for n in 1..200 {
                    term *= -x2 / n as f64;
                    let add = term / (2 * n + 1) as f64;
                    sum += add;
                    if add.abs() < 1e-18 {
                        break;
                    }
                }
                1.0 - sum
            } else {
                // Continued fraction for the complementary function.
                let x2 = x * x;
                let mut cf = 0.0;
                for n in (1..60).rev() {
                    cf = 0.5 * n as f64 / (x + cf);
                }
                (-x2).exp() / ((x + cf) * std::f64::consts::PI.sqrt())
            }
        }

        pub fn phi(z: f64) -> f64 {
            0.5 * erfc_ind(-z / std::f64::consts::SQRT_2)
        }

        pub fn pdf(z: f64) -> f64 {
            (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
        }

        fn chi_scale_pdf(s: f64, nu: f64) -> f64 {
            if s <= 0.0 {
                return 0.0;
            }
            let logp = 0.5 * nu * nu.ln() + (nu - 1.0) * s.ln() - 0.5 * nu * s * s
                - (0.5 * nu - 1.0) * std::f64::consts::LN_2
                - statrs::function::gamma::ln_gamma(0.5 * nu);
            logp.exp()
        }

        /// Simpson tensor quadrature of
        /// integral over s,z of f_nu(s) k phi(z) [Phi(z)-Phi(z-qs)]^(k-1).
        pub fn srange_cdf_2d(q: f64, k: usize, df: usize, n: usize) -> f64 {
            let nu = df as f64;
            let (z_lo, z_hi) = (-9.0f64, 9.0f64);
            let (s_lo, s_hi) = (1e-9f64, 1.0 + 12.0 / nu.sqrt());
            let n = if n % 2 == 0 { n + 1 } else { n };
            let hz = (z_hi - z_lo) / (n - 1) as f64;
            let hs = (s_hi - s_lo) / (n - 1) as f64;
            let wsimp = |i: usize| -> f64 {
                if i == 0 || i == n - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                }
            };
            let mut total = 0.0;
            for si in 0..n {
                let s = s_lo + si as f64 * hs;
                let fs = chi_scale_pdf(s, nu);
                if fs == 0.0 {
                    continue;
                }
                let w = q * s;
                let mut inner = 0.0;
                for zi in 0..n {
                    let z = z_lo + zi as f64 * hz;
                    let span = phi(z) - phi(z - w);
                    inner += wsimp(zi) * pdf(z) * span.powi(k as i32 - 1);
                }
                total += wsimp(si) * fs * inner;
            }
            (k as f64 * total * hz * hs / 9.0).clamp(0.0, 1.0)
        }
    }

    #[test]
    fn oracle_erfc_matches_statrs() {
        for x in [-3.0, -1.0, -0.1, 0.0, 0.5, 1.5, 3.0, 5.0] {
            let a = oracle::phi(x);
            let b = normal_cdf(x);
            // statrs's erf carries ~1e-11 absolute error; the oracle's
            // series/continued-fraction is tighter.
            assert!((a - b).abs() < 1e-9, "phi({x}): {a} vs {b}");
        }
    }

    #[test]
    fn srange_cdf_matches_2d_quadrature_oracle() {
        for (q, k, df) in [(2.0, 3, 6), (3.5, 3, 6), (4.339, 3, 6), (3.0, 4, 12)] {
            let ours = studentized_range_cdf(q, k, df);
            let oracle = oracle::srange_cdf_2d(q, k, df, 801);
            assert!(
                (ours - oracle).abs() < 1e-4,
                "q={q} k={k} df={df}: {ours} vs {oracle}"
            );
        }
    }

    #[test]
    fn tukey_p_values_match_quadrature_oracle_on_toy_data() {
        let v = toy_groups();
        let anova = one_way_anova(&v).unwrap();
        let cmp = tukey_hsd(&v, &anova, 0.05).unwrap();
        for c in &cmp {
            let oracle_p = 1.0 - oracle::srange_cdf_2d(c.q_stat, 3, 6, 801);
            assert!(
                (c.p_adj - oracle_p).abs() < 1e-4,
                "pair {:?}: {} vs {}",
                c.pair,
                c.p_adj,
                oracle_p
            );
        }
    }
}
