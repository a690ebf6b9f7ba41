//! Annotation files: per-instrument usage intervals on the video timeline.
//!
//! ```text
//! # kinemetrics/1 annotations
//! instrument,start_s,end_s
//! bipolar,12.5,80.0
//! ```
//!
//! Times are video seconds; sub-frame precision beyond the 80 fps video
//! rate is not claimed. Overlapping rows for one instrument are merged with
//! a warning rather than rejected.

use std::path::Path;

use crate::intervals::Interval;
use crate::io::{write_atomic, IoError, SCHEMA};
use crate::sync::{AnnotationSet, Instrument};

pub const ANNOTATIONS_KIND: &str = "annotations";
pub const ANNOTATION_COLUMNS: &str = "instrument,start_s,end_s";

pub fn write_annotations(path: &Path, ann: &AnnotationSet) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(&format!("# {SCHEMA} {ANNOTATIONS_KIND}\n"));
    out.push_str(ANNOTATION_COLUMNS);
    out.push('\n');
    for (inst, set) in ann.iter() {
        for iv in set.intervals() {
            out.push_str(&format!(
                "{},{},{}\n",
                inst,
                crate::io::fmt_f64(iv.start.as_secs_f64()),
                crate::io::fmt_f64(iv.end.as_secs_f64()),
            ));
        }
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_annotations(path: &Path) -> Result<AnnotationSet, IoError> {
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
    if parts.next() != Some(ANNOTATIONS_KIND) {
        return Err(IoError::parse(path, ln + 1, "not an annotations file"));
    }
    let (ln, columns) = lines
        .next()
        .ok_or_else(|| IoError::parse(path, 2, "missing column header"))?;
    if columns != ANNOTATION_COLUMNS {
        return Err(IoError::parse(path, ln + 1, "unexpected column header"));
    }

    let mut entries = Vec::new();
    for (ln, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = ln + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(IoError::parse(
                path,
                lineno,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        let instrument = Instrument::parse(fields[0]).ok_or_else(|| {
            IoError::parse(
                path,
                lineno,
                format!("unknown instrument {:?}", fields[0]),
            )
        })?;
        let start_s: f64 = fields[1]
            .parse()
            .map_err(|_| IoError::parse(path, lineno, "bad start_s"))?;
        let end_s: f64 = fields[2]
            .parse()
            .map_err(|_| IoError::parse(path, lineno, "bad end_s"))?;
        if !start_s.is_finite() || !end_s.is_finite() || start_s < 0.0 {
            return Err(IoError::parse(path, lineno, "times must be finite and non-negative"));
        }
        let interval = Interval::from_secs(start_s, end_s)
            .ok_or_else(|| IoError::parse(path, lineno, "start_s must be before end_s"))?;
        entries.push((instrument, interval));
    }

    let (set, merged) = AnnotationSet::from_entries(entries);
    if merged > 0 {
        log::warn!(
            "{}: merged {merged} overlapping annotation row(s)",
            path.display()
        );
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let (ann, _) = AnnotationSet::from_entries(vec![
            (Instrument::Bipolar, Interval::from_secs(1.0, 5.0).unwrap()),
            (Instrument::Aspirator, Interval::from_secs(2.5, 9.0).unwrap()),
            (Instrument::Scissors, Interval::from_secs(0.25, 1.75).unwrap()),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotations.csv");
        write_annotations(&path, &ann).unwrap();
        let back = read_annotations(&path).unwrap();
        assert_eq!(back, ann);
    }

    #[test]
    fn overlapping_rows_merge_into_one_interval() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotations.csv");
        std::fs::write(
            &path,
            format!("# {SCHEMA} annotations\n{ANNOTATION_COLUMNS}\nbipolar,1.0,5.0\nbipolar,4.0,8.0\n"),
        )
        .unwrap();
        let ann = read_annotations(&path).unwrap();
        let set = ann.usage(Instrument::Bipolar);
        assert_eq!(set.intervals(), &[Interval::from_secs(1.0, 8.0).unwrap()]);
    }

    #[test]
    fn unknown_instrument_is_rejected_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotations.csv");
        std::fs::write(
            &path,
            format!("# {SCHEMA} annotations\n{ANNOTATION_COLUMNS}\ndrill,1.0,5.0\n"),
        )
        .unwrap();
        let err = read_annotations(&path).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn inverted_interval_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotations.csv");
        std::fs::write(
            &path,
            format!("# {SCHEMA} annotations\n{ANNOTATION_COLUMNS}\nbipolar,5.0,1.0\n"),
        )
        .unwrap();
        assert!(read_annotations(&path).is_err());
    }
}
