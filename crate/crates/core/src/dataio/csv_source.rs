use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ActivityId, Labels, Recording};
use crate::error::{Error, Result};

/// Column mapping for a tri-axial (or wider) CSV export with a header row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub subject_column: String,
    pub label_column: String,
    pub channel_columns: Vec<String>,
    pub sample_rate_hz: f64,
}

impl CsvSchema {
    pub fn triaxial() -> Self {
        Self {
            subject_column: "subject".into(),
            label_column: "label".into(),
            channel_columns: vec!["x".into(), "y".into(), "z".into()],
            sample_rate_hz: 100.0,
        }
    }
}

/// Reads a CSV into one recording per subject, ordered by subject id. Rows
/// keep their file order within a subject.
pub fn load_generic_csv(path: &Path, schema: &CsvSchema) -> Result<Vec<Recording>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let mut wanted = vec![schema.subject_column.as_str(), schema.label_column.as_str()];
    wanted.extend(schema.channel_columns.iter().map(String::as_str));
    let missing: Vec<String> = wanted
        .iter()
        .filter(|c| find(c).is_none())
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::SchemaMismatch { missing });
    }
    let subject_idx = find(&schema.subject_column).unwrap();
    let label_idx = find(&schema.label_column).unwrap();
    let channel_idx: Vec<usize> = schema
        .channel_columns
        .iter()
        .map(|c| find(c).unwrap())
        .collect();

    struct Acc {
        values: Vec<Vec<f64>>,
        labels: Vec<ActivityId>,
    }
    let mut by_subject: BTreeMap<String, Acc> = BTreeMap::new();

    for (i, record) in reader.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = i + 2;
        let malformed = |reason: String| Error::MalformedRow {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let subject = record
            .get(subject_idx)
            .ok_or_else(|| malformed("missing subject".into()))?
            .to_string();
        let label: ActivityId = record
            .get(label_idx)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed(format!("bad label in column {}", schema.label_column)))?;
        let acc = by_subject.entry(subject).or_insert_with(|| Acc {
            values: vec![Vec::new(); channel_idx.len()],
            labels: Vec::new(),
        });
        for (dst, &c) in acc.values.iter_mut().zip(&channel_idx) {
            let v: f64 = record
                .get(c)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| malformed(format!("bad value in column {}", headers[c].to_string())))?;
            dst.push(v);
        }
        acc.labels.push(label);
    }

    Ok(by_subject
        .into_iter()
        .map(|(subject_id, mut acc)| {
            for ch in &mut acc.values {
                super::pamap2::fill_missing(ch);
            }
            let t = acc.labels.len();
            let channels = Array2::from_shape_fn((acc.values.len(), t), |(c, i)| acc.values[c][i]);
            Recording {
                subject_id,
                channels,
                sample_rate_hz: schema.sample_rate_hz,
                labels: Labels::PerTimestep(acc.labels),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn single_subject() {
        let f = write("subject,label,x,y,z\na,1,0.1,0.2,0.3\na,1,0.4,0.5,0.6\n");
        let recs = load_generic_csv(f.path(), &CsvSchema::triaxial()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].n_channels(), 3);
        assert_eq!(recs[0].len(), 2);
        assert_eq!(recs[0].channels[[2, 1]], 0.6);
    }

    #[test]
    fn interleaved_subjects_keep_file_order() {
        let f = write("subject,label,x,y,z\nb,1,1,0,0\na,2,2,0,0\nb,1,3,0,0\na,2,4,0,0\nb,3,5,0,0\n");
        let recs = load_generic_csv(f.path(), &CsvSchema::triaxial()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].subject_id, "a");
        assert_eq!(recs[0].channels.row(0).to_vec(), vec![2.0, 4.0]);
        assert_eq!(recs[1].channels.row(0).to_vec(), vec![1.0, 3.0, 5.0]);
        assert_eq!(recs[1].labels, Labels::PerTimestep(vec![1, 1, 3]));
    }

    #[test]
    fn empty_file_is_empty() {
        let f = write("");
        assert!(load_generic_csv(f.path(), &CsvSchema::triaxial())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn missing_columns_listed() {
        let f = write("subject,label,x\na,1,0\n");
        match load_generic_csv(f.path(), &CsvSchema::triaxial()) {
            Err(Error::SchemaMismatch { missing }) => assert_eq!(missing, vec!["y", "z"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_value_reports_line() {
        let f = write("subject,label,x,y,z\na,1,0,0,0\na,1,zz,0,0\n");
        match load_generic_csv(f.path(), &CsvSchema::triaxial()) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
