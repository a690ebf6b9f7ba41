//! Flat metric tables: one row per trial x instrument and one per
//! trial x pair. This is the interchange format between `analyze` and
//! `compare`, so the column schema here is normative.

use std::path::Path;

use crate::io::{fmt_f64, write_atomic, IoError, SCHEMA};
use crate::metrics::MetricsReport;
use crate::stats::Group;

pub const INSTRUMENT_TABLE_KIND: &str = "metrics-instruments";
pub const PAIR_TABLE_KIND: &str = "metrics-pairs";

pub const INSTRUMENT_COLUMNS: &str = "participant,group,trial,instrument,avg_velocity_mm_s,avg_acceleration_mm_s2,avg_jerk_mm_s3,path_length_mm,npl_annotated_mm_s,npl_captured_mm_s,t_usage_s,t_track_s,t_capt_s,pct_captured,skipped_segments";
pub const PAIR_COLUMNS: &str =
    "participant,group,trial,pair,asd_mm,bit_usage_s,bit_track_s,bit_capt_s,coord_idx,efficiency_idx";

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes `instruments.csv` and `pairs.csv` under `dir`.
pub fn write_metrics_report(dir: &Path, report: &MetricsReport) -> Result<(), IoError> {
    let mut inst = String::new();
    inst.push_str(&format!("# {SCHEMA} {INSTRUMENT_TABLE_KIND}\n"));
    inst.push_str(INSTRUMENT_COLUMNS);
    inst.push('\n');
    for e in &report.instruments {
        let (vel, acc, jerk, path, npl_a, npl_c, skipped) = match &e.motion {
            Some(m) => (
                fmt_f64(m.avg_velocity),
                fmt_f64(m.avg_acceleration),
                fmt_f64(m.avg_jerk),
                fmt_f64(m.path_length),
                opt(m.npl_annotated),
                opt(m.npl_captured),
                m.skipped_segments.to_string(),
            ),
            None => (
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ),
        };
        inst.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            report.participant,
            report.group,
            report.trial_index,
            e.instrument,
            vel,
            acc,
            jerk,
            path,
            npl_a,
            npl_c,
            fmt_f64(e.time.t_usage),
            fmt_f64(e.time.t_track),
            fmt_f64(e.time.t_capt),
            opt(e.time.pct_captured),
            skipped,
        ));
    }
    write_atomic(&dir.join("instruments.csv"), inst.as_bytes())?;

    let mut pairs = String::new();
    pairs.push_str(&format!("# {SCHEMA} {PAIR_TABLE_KIND}\n"));
    pairs.push_str(PAIR_COLUMNS);
    pairs.push('\n');
    for p in &report.pairs {
        pairs.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            report.participant,
            report.group,
            report.trial_index,
            p.label(),
            opt(p.bimanual.asd),
            fmt_f64(p.bimanual.bit_usage),
            fmt_f64(p.bimanual.bit_track),
            fmt_f64(p.bimanual.bit_capt),
            opt(p.bimanual.coord_idx),
            opt(p.bimanual.efficiency_idx),
        ));
    }
    write_atomic(&dir.join("pairs.csv"), pairs.as_bytes())
}

/// One metric observation pulled back out of a report table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub participant: String,
    pub group: Group,
    pub trial_index: u32,
    /// Instrument or pair label the metric belongs to.
    pub entity: String,
    /// Column name from the table header.
    pub metric: String,
    pub value: f64,
}

/// Reads a metrics table (either kind) back into long-format rows, skipping
/// empty (undefined-flagged) cells.
pub fn read_metrics_table(path: &Path) -> Result<Vec<MetricRow>, IoError> {
    if !path.exists() {
        return Err(IoError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (ln, header) = lines
        .next()
        .ok_or_else(|| IoError::parse(path, 1, "empty file"))?;
    let schema_line = header
        .strip_prefix("# ")
        .ok_or_else(|| IoError::parse(path, ln + 1, "missing schema header"))?;
    let mut parts = schema_line.split_whitespace();
    let schema = parts.next().unwrap_or_default();
    if schema != SCHEMA {
        return Err(IoError::SchemaVersionMismatch {
            path: path.to_path_buf(),
            found: schema.to_string(),
        });
    }
    let kind = parts.next().unwrap_or_default();
    if kind != INSTRUMENT_TABLE_KIND && kind != PAIR_TABLE_KIND {
        return Err(IoError::parse(path, ln + 1, "not a metrics table"));
    }

    let (_, columns) = lines
        .next()
        .ok_or_else(|| IoError::parse(path, 2, "missing column header"))?;
    let cols: Vec<&str> = columns.split(',').collect();
    if cols.len() < 5 || cols[0] != "participant" || cols[1] != "group" || cols[2] != "trial" {
        return Err(IoError::parse(path, 2, "unexpected column header"));
    }

    let mut rows = Vec::new();
    for (ln, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = ln + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(IoError::parse(
                path,
                lineno,
                format!("expected {} fields, got {}", cols.len(), fields.len()),
            ));
        }
        let group = Group::parse(fields[1])
            .ok_or_else(|| IoError::parse(path, lineno, format!("unknown group {:?}", fields[1])))?;
        let trial_index: u32 = fields[2]
            .parse()
            .map_err(|_| IoError::parse(path, lineno, "bad trial index"))?;
        for (i, col) in cols.iter().enumerate().skip(4) {
            if fields[i].is_empty() {
                continue;
            }
            let value: f64 = fields[i].parse().map_err(|_| {
                IoError::parse(path, lineno, format!("bad numeric value in column {col}"))
            })?;
            rows.push(MetricRow {
                participant: fields[0].to_string(),
                group,
                trial_index,
                entity: fields[3].to_string(),
                metric: col.to_string(),
                value,
            });
        }
    }
    Ok(rows)
}
