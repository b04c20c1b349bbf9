//! Experiment configuration, read from TOML.
//!
//! All scientific parameters live in the file. Only filesystem locations may
//! be overridden from the environment (`KDSENSE_DATA_ROOT`, `KDSENSE_OUT`,
//! `KDSENSE_CACHE`), and those locations are left out of the config hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::AugmentationPolicy;
use crate::dataio::{
    downsample, holdout_split, load_generic_csv, load_pamap2, loso_splits, make_synthetic,
    segment_windows, ActivityId, CsvSchema, DatasetSplit, LabelPolicy, Pamap2Config,
    PreparedDataset, Recording, SyntheticConfig, WindowConfig, PAMAP2_ACTIVITIES,
};
use crate::distill::{EskdRule, KdConfig, TrainOptions, TrainingSchedule};
use crate::error::{Error, Result};
use crate::models::ModelSpec;

pub const ENV_DATA_ROOT: &str = "KDSENSE_DATA_ROOT";
pub const ENV_OUT: &str = "KDSENSE_OUT";
pub const ENV_CACHE: &str = "KDSENSE_CACHE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    Pamap2 {
        #[serde(default)]
        root: PathBuf,
        #[serde(default = "pamap2_subjects")]
        subjects: Vec<String>,
        #[serde(default = "pamap2_activities")]
        activities: Vec<ActivityId>,
    },
    Csv {
        #[serde(default)]
        path: PathBuf,
        schema: CsvSchema,
    },
}

fn pamap2_subjects() -> Vec<String> {
    Pamap2Config::default().subjects
}

fn pamap2_activities() -> Vec<ActivityId> {
    PAMAP2_ACTIVITIES.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum SplitMode {
    /// Leave-one-subject-out; one split per subject.
    Loso,
    /// A fixed set of test subjects.
    Holdout { test_subjects: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetProfile {
    pub source: DataSource,
    pub window_len: usize,
    pub step: usize,
    #[serde(default = "one")]
    pub downsample: usize,
    #[serde(default)]
    pub label_policy: LabelPolicy,
    #[serde(default)]
    pub classes: Option<Vec<ActivityId>>,
    pub split: SplitMode,
    /// Split used by `train`; for LOSO the index into subject order.
    #[serde(default)]
    pub fold: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsConfig {
    /// Architecture strings such as `wrn16-3` or `resnet18-8`.
    pub teacher: String,
    pub student: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    pub teacher: AugmentationPolicy,
    pub student: AugmentationPolicy,
    pub test: AugmentationPolicy,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            teacher: AugmentationPolicy::none(),
            student: AugmentationPolicy::none(),
            test: AugmentationPolicy::none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default = "ten")]
    pub checkpoint_every: usize,
    #[serde(default = "eval_batch")]
    pub eval_batch_size: usize,
    #[serde(default)]
    pub teacher_sees_clean: bool,
    #[serde(default)]
    pub eskd_rule: EskdRule,
}

fn ten() -> usize {
    10
}

fn eval_batch() -> usize {
    256
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            checkpoint_every: ten(),
            eval_batch_size: eval_batch(),
            teacher_sees_clean: false,
            eskd_rule: EskdRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub dataset: DatasetProfile,
    pub models: ModelsConfig,
    pub schedule: TrainingSchedule,
    #[serde(default)]
    pub kd: KdConfig,
    #[serde(default)]
    pub augment: AugmentConfig,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(s).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, then applies environment path overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.apply_overrides(|k| std::env::var_os(k).map(PathBuf::from));
        Ok(cfg)
    }

    /// Parses a canonical JSON snapshot; path fields come back empty.
    pub fn from_canonical_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("config: {e}")))
    }

    /// Replaces path fields from `lookup` (normally the process environment).
    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<PathBuf>) {
        if let Some(root) = lookup(ENV_DATA_ROOT) {
            match &mut self.dataset.source {
                DataSource::Pamap2 { root: r, .. } => *r = root,
                DataSource::Csv { path, .. } => *path = root,
                DataSource::Synthetic(_) => {}
            }
        }
        if let Some(out) = lookup(ENV_OUT) {
            self.output_dir = out;
        }
        if let Some(cache) = lookup(ENV_CACHE) {
            self.cache_dir = Some(cache);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if d.window_len == 0 || d.step == 0 || d.downsample == 0 {
            return Err(Error::InvalidArgument(
                "window_len, step and downsample must be >= 1".into(),
            ));
        }
        if let SplitMode::Holdout { test_subjects } = &d.split {
            if test_subjects.is_empty() {
                return Err(Error::InvalidArgument("holdout needs test_subjects".into()));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("at least one seed is required".into()));
        }
        self.schedule.validate()?;
        self.kd.validate()?;
        self.augment.teacher.validate()?;
        self.augment.student.validate()?;
        self.augment.test.validate()?;
        // architecture strings must parse; channel/class counts come later
        ModelSpec::from_arch(&self.models.teacher, 1, 2)?;
        ModelSpec::from_arch(&self.models.student, 1, 2)?;
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("cache"))
    }

    /// Canonical JSON: keys sorted, paths removed.
    pub fn canonical_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
            obj.remove("cache_dir");
        }
        if let Some(src) = v.pointer_mut("/dataset/source").and_then(|s| s.as_object_mut()) {
            src.remove("root");
            src.remove("path");
        }
        Ok(serde_json::to_string(&v)?)
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical_json`].
    pub fn config_hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.canonical_json()?.as_bytes());
        Ok(hex::encode(digest)[..16].to_string())
    }

    /// Hash of the dataset section alone, stamped on the window cache.
    pub fn dataset_hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(&self.dataset)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("fold");
        }
        if let Some(src) = v.pointer_mut("/source").and_then(|s| s.as_object_mut()) {
            src.remove("root");
            src.remove("path");
        }
        let digest = Sha256::digest(serde_json::to_string(&v)?.as_bytes());
        Ok(hex::encode(digest)[..16].to_string())
    }

    pub fn window_config(&self) -> WindowConfig {
        WindowConfig {
            window_len: self.dataset.window_len,
            step: self.dataset.step,
            label_policy: self.dataset.label_policy,
            class_set: self.dataset.classes.clone(),
        }
    }

    pub fn train_options(&self) -> Result<TrainOptions> {
        let mut checkpoint_epochs = Vec::new();
        if let EskdRule::FixedEpoch(e) = self.training.eskd_rule {
            checkpoint_epochs.push(e);
        }
        Ok(TrainOptions {
            checkpoint_every: self.training.checkpoint_every,
            checkpoint_epochs,
            eval_batch_size: self.training.eval_batch_size,
            teacher_sees_clean: self.training.teacher_sees_clean,
            config_hash: self.config_hash()?,
        })
    }

    /// Raw recordings, downsampled.
    pub fn load_recordings(&self) -> Result<Vec<Recording>> {
        let recs = match &self.dataset.source {
            DataSource::Synthetic(cfg) => make_synthetic(cfg)?,
            DataSource::Pamap2 {
                root,
                subjects,
                activities,
            } => {
                let cfg = Pamap2Config {
                    subjects: subjects.clone(),
                    activities: activities.clone(),
                    ..Pamap2Config::default()
                };
                load_pamap2(root, &cfg)?
            }
            DataSource::Csv { path, schema } => load_generic_csv(path, schema)?,
        };
        if self.dataset.downsample == 1 {
            return Ok(recs);
        }
        recs.iter()
            .map(|r| downsample(r, self.dataset.downsample))
            .collect()
    }

    /// Windows, splits and train statistics ready for caching.
    pub fn prepare_dataset(&self) -> Result<PreparedDataset> {
        let recs = self.load_recordings()?;
        if recs.is_empty() {
            return Err(Error::Empty("no recordings loaded".into()));
        }
        let wcfg = self.window_config();
        let mut windows = Vec::new();
        for r in &recs {
            windows.extend(segment_windows(r, &wcfg)?);
        }
        let splits: Vec<(String, DatasetSplit)> = match &self.dataset.split {
            SplitMode::Loso => {
                let mut subjects: Vec<String> =
                    recs.iter().map(|r| r.subject_id.clone()).collect();
                subjects.sort();
                subjects.dedup();
                subjects
                    .into_iter()
                    .zip(loso_splits(&recs, &wcfg)?)
                    .map(|(s, sp)| (format!("loso-{s}"), sp))
                    .collect()
            }
            SplitMode::Holdout { test_subjects } => {
                vec![("holdout".into(), holdout_split(&recs, &wcfg, test_subjects)?)]
            }
        };
        let refs: Vec<(String, &DatasetSplit)> =
            splits.iter().map(|(n, s)| (n.clone(), s)).collect();
        Ok(PreparedDataset::from_splits(
            windows,
            &refs,
            self.dataset_hash()?,
        ))
    }

    /// Teacher and student specs sized for `split`.
    pub fn model_specs(&self, split: &DatasetSplit) -> Result<(ModelSpec, ModelSpec)> {
        let (c, k) = (split.n_channels(), split.n_classes());
        Ok((
            ModelSpec::from_arch(&self.models.teacher, c, k)?,
            ModelSpec::from_arch(&self.models.student, c, k)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
name = "demo"
seeds = [0, 1, 2]
output_dir = "runs/demo"

[dataset]
window_len = 128
step = 128
split = { mode = "holdout", test_subjects = ["synth05"] }

[dataset.source]
kind = "synthetic"
n_classes = 4
n_subjects = 6
channels = 3
t = 128
windows_per_class = 4
seed = 7

[models]
teacher = "wrn16-2"
student = "wrn16-1"

[schedule]
total_epochs = 4
initial_lr = 0.05
first_drop_factor = 0.5
batch_size = 16

[kd]
tau = 4.0
lam = 0.7
mode = "eskd"

[augment.teacher]
kind = "none"
[augment.student]
kind = "shift"
max_shift_frac = 0.5
[augment.test]
kind = "none"
"#;

    #[test]
    fn parses_and_roundtrips() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.config_hash().unwrap(), cfg.config_hash().unwrap());
        let snap = ExperimentConfig::from_canonical_json(&cfg.canonical_json().unwrap()).unwrap();
        assert_eq!(snap.config_hash().unwrap(), cfg.config_hash().unwrap());
    }

    #[test]
    fn paths_do_not_change_hash() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let mut moved = cfg.clone();
        moved.apply_overrides(|k| match k {
            ENV_OUT => Some("/elsewhere".into()),
            ENV_CACHE => Some("/tmp/c".into()),
            _ => None,
        });
        assert_eq!(moved.output_dir, PathBuf::from("/elsewhere"));
        assert_eq!(moved.config_hash().unwrap(), cfg.config_hash().unwrap());

        let mut changed = cfg.clone();
        changed.kd.lam = 0.99;
        assert_ne!(changed.config_hash().unwrap(), cfg.config_hash().unwrap());
        assert_eq!(cfg.config_hash().unwrap().len(), 16);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml_str(&SAMPLE.replace("lam = 0.7", "lam = 1.7")).is_err());
        assert!(ExperimentConfig::from_toml_str(&SAMPLE.replace("wrn16-2", "vgg11")).is_err());
        assert!(ExperimentConfig::from_toml_str(&SAMPLE.replace("seeds = [0, 1, 2]", "seeds = []")).is_err());
        assert!(ExperimentConfig::from_toml_str(&SAMPLE.replace("name =", "nmae =")).is_err());
    }

    #[test]
    fn prepares_synthetic() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let ds = cfg.prepare_dataset().unwrap();
        assert_eq!(ds.windows.len(), 6 * 4 * 4);
        assert_eq!(ds.splits.len(), 1);
        let split = ds.materialize(0).unwrap();
        assert_eq!(split.test_subjects().into_iter().collect::<Vec<_>>(), vec!["synth05"]);
        let (t, s) = cfg.model_specs(&split).unwrap();
        assert_eq!((t.in_channels, s.n_classes), (3, 4));
    }
}
