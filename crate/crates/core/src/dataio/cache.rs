//! Windowed dataset cache: a little-endian binary blob of window samples
//! (`windows.bin`) and a JSON sidecar (`windows.json`) carrying the schema
//! version, class map, per-split subjects and normalization statistics.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ActivityId, DatasetSplit, NormStats, Window};
use crate::error::{Error, Result};

pub const CACHE_SCHEMA_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"KDSW";
const BLOB: &str = "windows.bin";
const SIDECAR: &str = "windows.json";

/// Subject membership and train statistics of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndex {
    pub name: String,
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
    pub normalization: NormStats,
}

/// All windows of a dataset, stored once, plus the split definitions.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    pub windows: Vec<Window>,
    pub class_set: Vec<ActivityId>,
    pub splits: Vec<SplitIndex>,
    pub config_hash: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct WindowMeta {
    subject: String,
    label: ActivityId,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    total_windows: usize,
    per_class: BTreeMap<ActivityId, usize>,
    per_subject: BTreeMap<String, usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    schema_version: u32,
    config_hash: String,
    n_channels: usize,
    window_len: usize,
    class_set: Vec<ActivityId>,
    splits: Vec<SplitIndex>,
    manifest: Manifest,
    windows: Vec<WindowMeta>,
}

impl PreparedDataset {
    /// Builds the cache form from already computed splits; every split must
    /// draw from the same window pool.
    pub fn from_splits(
        windows: Vec<Window>,
        splits: &[(String, &DatasetSplit)],
        config_hash: String,
    ) -> Self {
        let class_set = splits
            .first()
            .map(|(_, s)| s.class_set.clone())
            .unwrap_or_default();
        let splits = splits
            .iter()
            .map(|(name, s)| SplitIndex {
                name: name.clone(),
                train_subjects: s.train_subjects().into_iter().map(String::from).collect(),
                test_subjects: s.test_subjects().into_iter().map(String::from).collect(),
                normalization: s.normalization.clone(),
            })
            .collect();
        Self {
            windows,
            class_set,
            splits,
            config_hash,
        }
    }

    pub fn per_class_counts(&self) -> BTreeMap<ActivityId, usize> {
        let mut m = BTreeMap::new();
        for w in &self.windows {
            *m.entry(w.label).or_default() += 1;
        }
        m
    }

    pub fn per_subject_counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for w in &self.windows {
            *m.entry(w.subject_id.clone()).or_default() += 1;
        }
        m
    }

    /// Reassembles split `idx` with the stored train statistics applied.
    pub fn materialize(&self, idx: usize) -> Result<DatasetSplit> {
        let spec = self.splits.get(idx).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "split {idx} out of range ({} splits)",
                self.splits.len()
            ))
        })?;
        let mut train = Vec::new();
        let mut test = Vec::new();
        for w in &self.windows {
            if spec.test_subjects.contains(&w.subject_id) {
                test.push(w.clone());
            } else if spec.train_subjects.contains(&w.subject_id) {
                train.push(w.clone());
            }
        }
        for w in train.iter_mut().chain(test.iter_mut()) {
            spec.normalization.apply(w);
        }
        Ok(DatasetSplit {
            train,
            test,
            class_set: self.class_set.clone(),
            normalization: spec.normalization.clone(),
            normalized: true,
        })
    }
}

pub fn write_cache(dir: &Path, ds: &PreparedDataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (c, t) = ds.windows.first().map(|w| w.data.dim()).unwrap_or((0, 0));
    let mut blob = Vec::with_capacity(20 + ds.windows.len() * c * t * 8);
    blob.extend_from_slice(MAGIC);
    blob.extend_from_slice(&CACHE_SCHEMA_VERSION.to_le_bytes());
    blob.extend_from_slice(&(ds.windows.len() as u64).to_le_bytes());
    blob.extend_from_slice(&(c as u32).to_le_bytes());
    blob.extend_from_slice(&(t as u32).to_le_bytes());
    for w in &ds.windows {
        if w.data.dim() != (c, t) {
            return Err(Error::ShapeMismatch(format!(
                "window of shape {:?} in a {c}x{t} cache",
                w.data.dim()
            )));
        }
        for v in w.data.iter() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sidecar = Sidecar {
        schema_version: CACHE_SCHEMA_VERSION,
        config_hash: ds.config_hash.clone(),
        n_channels: c,
        window_len: t,
        class_set: ds.class_set.clone(),
        splits: ds.splits.clone(),
        manifest: Manifest {
            total_windows: ds.windows.len(),
            per_class: ds.per_class_counts(),
            per_subject: ds.per_subject_counts(),
        },
        windows: ds
            .windows
            .iter()
            .map(|w| WindowMeta {
                subject: w.subject_id.clone(),
                label: w.label,
            })
            .collect(),
    };
    let blob_path = dir.join(BLOB);
    std::fs::write(&blob_path, blob).map_err(|e| Error::io(&blob_path, e))?;
    let side_path = dir.join(SIDECAR);
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    std::fs::write(&side_path, json).map_err(|e| Error::io(&side_path, e))?;
    Ok(())
}

pub fn read_cache(dir: &Path) -> Result<PreparedDataset> {
    let side_path = dir.join(SIDECAR);
    let text = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
    let side: Sidecar = serde_json::from_str(&text)?;
    if side.schema_version != CACHE_SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "cache schema version {} (expected {CACHE_SCHEMA_VERSION})",
            side.schema_version
        )));
    }
    let blob_path = dir.join(BLOB);
    let blob = std::fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    if blob.len() < 24 || &blob[..4] != MAGIC {
        return Err(Error::Format(format!("{} is not a window cache", blob_path.display())));
    }
    let u32_at = |o: usize| u32::from_le_bytes(blob[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    let n = u64::from_le_bytes(blob[8..16].try_into().unwrap()) as usize;
    let (c, t) = (u32_at(16) as usize, u32_at(20) as usize);
    if version != side.schema_version || n != side.windows.len() || blob.len() != 24 + n * c * t * 8 {
        return Err(Error::Format("window blob does not match its sidecar".into()));
    }
    let mut values = blob[24..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()));
    let windows = side
        .windows
        .into_iter()
        .map(|m| {
            let data: Vec<f64> = values.by_ref().take(c * t).collect();
            Window {
                data: Array2::from_shape_vec((c, t), data).expect("length checked above"),
                label: m.label,
                subject_id: m.subject,
            }
        })
        .collect();
    Ok(PreparedDataset {
        windows,
        class_set: side.class_set,
        splits: side.splits,
        config_hash: side.config_hash,
    })
}
