use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{segment_windows, ActivityId, DatasetSplit, Recording, Window, WindowConfig};
use crate::error::{Error, Result};

/// Per-channel z-score parameters, computed from training windows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl NormStats {
    pub fn from_windows(windows: &[Window]) -> Self {
        let Some(first) = windows.first() else {
            return Self {
                mean: Vec::new(),
                std: Vec::new(),
            };
        };
        let c = first.data.nrows();
        let mut sum = vec![0.0; c];
        let mut n = 0usize;
        for w in windows {
            for (ch, row) in w.data.rows().into_iter().enumerate() {
                sum[ch] += row.sum();
            }
            n += w.data.ncols();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut sq = vec![0.0; c];
        for w in windows {
            for (ch, row) in w.data.rows().into_iter().enumerate() {
                sq[ch] += row.iter().map(|v| (v - mean[ch]).powi(2)).sum::<f64>();
            }
        }
        let std = sq.iter().map(|s| (s / n as f64).sqrt()).collect();
        Self { mean, std }
    }

    pub fn apply(&self, w: &mut Window) {
        for (ch, mut row) in w.data.rows_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[ch], self.std[ch].max(STD_FLOOR));
            row.mapv_inplace(|v| (v - m) / s);
        }
    }
}

fn class_set_of(cfg: &WindowConfig, windows: &[Window]) -> Vec<ActivityId> {
    match &cfg.class_set {
        Some(c) => c.clone(),
        None => windows
            .iter()
            .map(|w| w.label)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    }
}

fn build_split(train: Vec<Window>, test: Vec<Window>, class_set: Vec<ActivityId>) -> DatasetSplit {
    let normalization = NormStats::from_windows(&train);
    DatasetSplit {
        train,
        test,
        class_set,
        normalization,
        normalized: false,
    }
}

/// Leave-one-subject-out: one split per distinct subject (ordered by subject
/// id), testing on that subject and training on the rest.
pub fn loso_splits(recs: &[Recording], cfg: &WindowConfig) -> Result<Vec<DatasetSplit>> {
    let subjects: BTreeSet<&str> = recs.iter().map(|r| r.subject_id.as_str()).collect();
    if subjects.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-subject-out needs at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    let mut windows = Vec::new();
    for r in recs {
        windows.extend(segment_windows(r, cfg)?);
    }
    let class_set = class_set_of(cfg, &windows);
    Ok(subjects
        .iter()
        .map(|s| {
            let (test, train): (Vec<_>, Vec<_>) =
                windows.iter().cloned().partition(|w| w.subject_id == *s);
            build_split(train, test, class_set.clone())
        })
        .collect())
}

/// Fixed subject hold-out: windows of `test_subjects` form the test set.
pub fn holdout_split(
    recs: &[Recording],
    cfg: &WindowConfig,
    test_subjects: &[String],
) -> Result<DatasetSplit> {
    let all: BTreeSet<&str> = recs.iter().map(|r| r.subject_id.as_str()).collect();
    for s in test_subjects {
        if !all.contains(s.as_str()) {
            return Err(Error::InvalidArgument(format!("unknown test subject {s}")));
        }
    }
    if test_subjects.is_empty() || test_subjects.len() >= all.len() {
        return Err(Error::InvalidArgument(
            "hold-out needs at least one train and one test subject".into(),
        ));
    }
    let mut windows = Vec::new();
    for r in recs {
        windows.extend(segment_windows(r, cfg)?);
    }
    let class_set = class_set_of(cfg, &windows);
    let (test, train) = windows
        .into_iter()
        .partition(|w| test_subjects.contains(&w.subject_id));
    Ok(build_split(train, test, class_set))
}

/// Applies the train-derived z-score to both halves of the split.
pub fn normalize(mut split: DatasetSplit) -> DatasetSplit {
    if split.normalized {
        return split;
    }
    let stats = split.normalization.clone();
    for w in split.train.iter_mut().chain(split.test.iter_mut()) {
        stats.apply(w);
    }
    split.normalized = true;
    split
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Labels;
    use ndarray::Array2;

    fn recs(n_subjects: usize) -> Vec<Recording> {
        (0..n_subjects)
            .map(|s| Recording {
                subject_id: format!("s{s}"),
                channels: Array2::from_shape_fn((2, 40), |(c, t)| {
                    if c == 0 {
                        5.0
                    } else {
                        (s * 40 + t) as f64
                    }
                }),
                sample_rate_hz: 10.0,
                labels: Labels::PerTimestep((0..40).map(|t| (t / 20) as u32).collect()),
            })
            .collect()
    }

    #[test]
    fn loso_partitions_windows() {
        let r = recs(9);
        let cfg = WindowConfig::new(10, 10);
        let splits = loso_splits(&r, &cfg).unwrap();
        assert_eq!(splits.len(), 9);
        let mut total_test = 0;
        for s in &splits {
            assert!(s.train_subjects().is_disjoint(&s.test_subjects()));
            assert_eq!(s.test_subjects().len(), 1);
            total_test += s.test.len();
        }
        assert_eq!(total_test, 9 * 4);
        assert_eq!(splits[0].class_set, vec![0, 1]);
    }

    #[test]
    fn loso_single_subject_errors() {
        assert!(loso_splits(&recs(1), &WindowConfig::new(10, 10)).is_err());
    }

    #[test]
    fn normalization_uses_train_only() {
        let r = recs(3);
        let split = holdout_split(&r, &WindowConfig::new(10, 10), &["s2".into()]).unwrap();
        let stats = split.normalization.clone();
        let n = normalize(split);
        // constant channel maps to zeros
        assert!(n.train.iter().all(|w| w.data.row(0).iter().all(|v| *v == 0.0)));
        let mean: f64 = n.train.iter().map(|w| w.data.row(1).sum()).sum::<f64>()
            / (n.train.len() * 10) as f64;
        assert!(mean.abs() < 1e-6);
        // train covers s0,s1 values 0..80, so the mean is 39.5
        assert!((stats.mean[1] - 39.5).abs() < 1e-12);
        // test is shifted by the train transform, not re-centred
        let test_mean: f64 = n.test.iter().map(|w| w.data.row(1).sum()).sum::<f64>()
            / (n.test.len() * 10) as f64;
        assert!(test_mean > 1.0);
    }
}
