//! PAMAP2 protocol files: whitespace-separated, 54 columns per row.
//!
//! Column layout: timestamp, activity id, heart rate, then three IMU blocks
//! (hand, chest, ankle) of 17 columns each. Within a block, column 0 is
//! temperature, 1..=12 are the 16g/6g accelerometers, gyroscope and
//! magnetometer, and 13..=16 are the orientation quaternion, which the
//! dataset documents as invalid.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ActivityId, Labels, Recording};
use crate::error::{Error, Result};

const N_COLUMNS: usize = 54;
const IMU_BLOCK: usize = 17;
const IMU_OFFSETS: [usize; 3] = [3, 20, 37];
const VALID_PER_IMU: usize = 13;

/// Heart rate plus 13 valid columns for each of the three IMUs.
pub const PAMAP2_CHANNELS: usize = 1 + 3 * VALID_PER_IMU;

/// The 12 protocol activities: lying, sitting, standing, walking, running,
/// cycling, nordic walking, ascending stairs, descending stairs, vacuum
/// cleaning, ironing, rope jumping.
pub const PAMAP2_ACTIVITIES: [ActivityId; 12] = [1, 2, 3, 4, 5, 6, 7, 12, 13, 16, 17, 24];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pamap2Config {
    pub subjects: Vec<String>,
    pub activities: Vec<ActivityId>,
    pub sample_rate_hz: f64,
}

impl Default for Pamap2Config {
    fn default() -> Self {
        Self {
            subjects: (101..=109).map(|s| s.to_string()).collect(),
            activities: PAMAP2_ACTIVITIES.to_vec(),
            sample_rate_hz: 100.0,
        }
    }
}

/// Indices (into the 54 raw columns) of the 40 retained channels.
fn selected_columns() -> Vec<usize> {
    let mut cols = vec![2];
    for off in IMU_OFFSETS {
        cols.extend(off..off + VALID_PER_IMU);
    }
    debug_assert!(IMU_OFFSETS[2] + IMU_BLOCK == N_COLUMNS);
    cols
}

fn subject_file(root: &Path, subject: &str) -> Option<PathBuf> {
    let name = format!("subject{subject}.dat");
    [root.join(&name), root.join("Protocol").join(&name)]
        .into_iter()
        .find(|p| p.is_file())
}

/// Loads one recording per configured subject, restricted to the configured
/// activities, with missing values interpolated.
pub fn load_pamap2(root: &Path, cfg: &Pamap2Config) -> Result<Vec<Recording>> {
    cfg.subjects
        .iter()
        .map(|subject| {
            let path = subject_file(root, subject).ok_or_else(|| Error::Ingestion {
                subject: subject.clone(),
                reason: format!(
                    "expected subject{subject}.dat under {} or {}/Protocol",
                    root.display(),
                    root.display()
                ),
            })?;
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            parse_subject(&text, &path, subject, cfg)
        })
        .collect()
}

pub(crate) fn parse_subject(
    text: &str,
    path: &Path,
    subject: &str,
    cfg: &Pamap2Config,
) -> Result<Recording> {
    let cols = selected_columns();
    let mut raw: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    let mut activity: Vec<ActivityId> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedRow {
            path: path.to_path_buf(),
            line: lineno + 1,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != N_COLUMNS {
            return Err(malformed(format!(
                "expected {N_COLUMNS} columns, found {}",
                fields.len()
            )));
        }
        let act: f64 = fields[1]
            .parse()
            .map_err(|_| malformed(format!("bad activity id {:?}", fields[1])))?;
        if !act.is_finite() || act < 0.0 || act.fract() != 0.0 {
            return Err(malformed(format!("bad activity id {:?}", fields[1])));
        }
        activity.push(act as ActivityId);
        for (dst, &c) in raw.iter_mut().zip(&cols) {
            // "NaN" parses as f64::NAN; missing samples are filled below.
            let v: f64 = fields[c]
                .parse()
                .map_err(|_| malformed(format!("column {}: {:?}", c + 1, fields[c])))?;
            dst.push(v);
        }
    }

    for channel in &mut raw {
        fill_missing(channel);
    }

    let keep: Vec<usize> = (0..activity.len())
        .filter(|&i| cfg.activities.contains(&activity[i]))
        .collect();
    let t = keep.len();
    let channels = Array2::from_shape_fn((cols.len(), t), |(c, i)| raw[c][keep[i]]);
    let labels = keep.iter().map(|&i| activity[i]).collect();

    Ok(Recording {
        subject_id: subject.to_string(),
        channels,
        sample_rate_hz: cfg.sample_rate_hz,
        labels: Labels::PerTimestep(labels),
    })
}

/// Linear interpolation across interior gaps, nearest-value fill at the
/// edges. A channel with no finite value at all becomes zeros.
pub(crate) fn fill_missing(x: &mut [f64]) {
    let finite: Vec<usize> = (0..x.len()).filter(|&i| x[i].is_finite()).collect();
    let (Some(&first), Some(&last)) = (finite.first(), finite.last()) else {
        x.iter_mut().for_each(|v| *v = 0.0);
        return;
    };
    for i in 0..first {
        x[i] = x[first];
    }
    for i in last + 1..x.len() {
        x[i] = x[last];
    }
    for pair in finite.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b > a + 1 {
            let (va, vb) = (x[a], x[b]);
            let span = (b - a) as f64;
            for i in a + 1..b {
                x[i] = va + (vb - va) * (i - a) as f64 / span;
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dataio::{segment_windows, WindowConfig};

    /// Renders one synthetic PAMAP2 row. Orientation columns hold junk that
    /// must never reach the output.
    pub(crate) fn row(ts: f64, activity: u32, hr: Option<f64>, base: f64) -> String {
        let mut f = vec![format!("{ts:.2}"), activity.to_string()];
        f.push(hr.map_or("NaN".into(), |v| v.to_string()));
        for imu in 0..3 {
            for k in 0..IMU_BLOCK {
                let v = if k >= VALID_PER_IMU {
                    -999.0
                } else {
                    base + (imu * 100 + k) as f64
                };
                f.push(v.to_string());
            }
        }
        f.join(" ")
    }

    #[test]
    fn forty_channels_and_activity_filter() {
        let mut lines = Vec::new();
        for i in 0..30 {
            let act = if i < 10 { 0 } else if i < 20 { 4 } else { 5 };
            lines.push(row(i as f64 * 0.01, act, Some(80.0), i as f64));
        }
        let rec = parse_subject(&lines.join("\n"), Path::new("x"), "101", &Pamap2Config::default())
            .unwrap();
        assert_eq!(rec.n_channels(), PAMAP2_CHANNELS);
        assert_eq!(PAMAP2_CHANNELS, 40);
        assert_eq!(rec.len(), 20);
        assert!(rec.channels.iter().all(|v| *v != -999.0 && v.is_finite()));
        // channel 1 is hand temperature = base + 0
        assert_eq!(rec.channels[[1, 0]], 10.0);
    }

    #[test]
    fn heart_rate_interpolated_and_edge_filled() {
        let lines: Vec<String> = (0..6)
            .map(|i| {
                let hr = match i {
                    1 => Some(100.0),
                    4 => Some(130.0),
                    _ => None,
                };
                row(i as f64, 1, hr, 0.0)
            })
            .collect();
        let rec = parse_subject(&lines.join("\n"), Path::new("x"), "101", &Pamap2Config::default())
            .unwrap();
        let hr = rec.channels.row(0).to_vec();
        assert_eq!(hr, vec![100.0, 100.0, 110.0, 120.0, 130.0, 130.0]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = format!("{}\n1.0 2 3\n", row(0.0, 1, Some(1.0), 0.0));
        match parse_subject(&text, Path::new("f.dat"), "101", &Pamap2Config::default()) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_subject_file_names_subject() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_pamap2(dir.path(), &Pamap2Config::default()).unwrap_err();
        match err {
            Error::Ingestion { subject, .. } => assert_eq!(subject, "101"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_activity_408_samples_gives_15_windows() {
        let lines: Vec<String> = (0..408).map(|i| row(i as f64, 7, Some(90.0), 0.0)).collect();
        let rec = parse_subject(&lines.join("\n"), Path::new("x"), "105", &Pamap2Config::default())
            .unwrap();
        let w = segment_windows(&rec, &WindowConfig::new(100, 22)).unwrap();
        assert_eq!(w.len(), 15);
    }

    #[test]
    fn fill_missing_all_nan() {
        let mut v = vec![f64::NAN; 3];
        fill_missing(&mut v);
        assert_eq!(v, vec![0.0; 3]);
    }
}
