//! Dataset ingestion, windowing and subject-disjoint splitting.

mod cache;
mod csv_source;
mod pamap2;
mod split;
mod synthetic;
mod window;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use cache::{read_cache, write_cache, PreparedDataset, SplitIndex, CACHE_SCHEMA_VERSION};
pub use csv_source::{load_generic_csv, CsvSchema};
pub use pamap2::{load_pamap2, Pamap2Config, PAMAP2_ACTIVITIES, PAMAP2_CHANNELS};
pub use split::{holdout_split, loso_splits, normalize, NormStats};
pub use synthetic::{make_synthetic, SyntheticConfig};
pub(crate) use window::stack_windows;
pub use window::{downsample, segment_windows, window_count, LabelPolicy, WindowConfig};

/// Activity identifier as it appears in the source data.
pub type ActivityId = u32;

/// Activity annotation attached to a recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Labels {
    PerTimestep(Vec<ActivityId>),
    PerRecording(ActivityId),
}

impl Labels {
    pub fn at(&self, t: usize) -> ActivityId {
        match self {
            Labels::PerTimestep(v) => v[t],
            Labels::PerRecording(id) => *id,
        }
    }
}

/// One subject's multichannel time series, channels × time.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub channels: Array2<f64>,
    pub sample_rate_hz: f64,
    pub labels: Labels,
}

impl Recording {
    pub fn n_channels(&self) -> usize {
        self.channels.nrows()
    }

    pub fn len(&self) -> usize {
        self.channels.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A fixed-length channels × time slice; the unit of training.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub data: Array2<f64>,
    pub label: ActivityId,
    pub subject_id: String,
}

/// Train/test partition with subject-disjoint windows.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<Window>,
    pub test: Vec<Window>,
    /// Ordered activity ids; a window's class index is its position here.
    pub class_set: Vec<ActivityId>,
    pub normalization: NormStats,
    pub normalized: bool,
}

impl DatasetSplit {
    pub fn class_index(&self, label: ActivityId) -> Option<usize> {
        self.class_set.iter().position(|&c| c == label)
    }

    pub fn n_classes(&self) -> usize {
        self.class_set.len()
    }

    pub fn n_channels(&self) -> usize {
        self.train
            .first()
            .or(self.test.first())
            .map(|w| w.data.nrows())
            .unwrap_or(0)
    }

    pub fn window_len(&self) -> usize {
        self.train
            .first()
            .or(self.test.first())
            .map(|w| w.data.ncols())
            .unwrap_or(0)
    }

    pub fn train_subjects(&self) -> std::collections::BTreeSet<&str> {
        self.train.iter().map(|w| w.subject_id.as_str()).collect()
    }

    pub fn test_subjects(&self) -> std::collections::BTreeSet<&str> {
        self.test.iter().map(|w| w.subject_id.as_str()).collect()
    }
}
