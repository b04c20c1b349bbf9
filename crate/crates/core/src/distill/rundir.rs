//! On-disk run layout:
//!
//! ```text
//! <run>/config.json        canonical config snapshot
//! <run>/metrics.jsonl      one EpochRecord per line
//! <run>/checkpoints/epoch_NNNN.ckpt
//! <run>/summary.json
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochRecord, TrainedRun};
use crate::error::{Error, Result};
use crate::models::Checkpoint;

pub const RUN_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub epoch: usize,
    pub file: String,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub config_hash: String,
    pub role: String,
    pub model: String,
    pub seed: u64,
    pub epochs: usize,
    pub final_test_accuracy: f64,
    pub best_epoch: usize,
    pub best_test_accuracy: f64,
    /// Test accuracy of the teacher snapshot used, for KD runs.
    #[serde(default)]
    pub teacher_accuracy: Option<f64>,
    pub checkpoints: Vec<CheckpointEntry>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    // write-then-rename so a crash never leaves a half-written artifact
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn checkpoint_file(epoch: usize) -> String {
    format!("checkpoints/epoch_{epoch:04}.ckpt")
}

/// Writes every artifact of `run`; `summary.json` goes last and marks the
/// run complete.
pub fn write_run(
    dir: &Path,
    run: &TrainedRun,
    config_json: &str,
    role: &str,
    teacher_accuracy: Option<f64>,
) -> Result<RunSummary> {
    std::fs::create_dir_all(dir.join("checkpoints")).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("config.json"), config_json.as_bytes())?;

    let mut metrics = Vec::new();
    for r in &run.records {
        serde_json::to_writer(&mut metrics, r)?;
        metrics.write_all(b"\n").map_err(|e| Error::io(dir, e))?;
    }
    write_file(&dir.join("metrics.jsonl"), &metrics)?;

    let mut entries = Vec::new();
    for c in &run.checkpoints {
        let file = checkpoint_file(c.epoch);
        write_file(&dir.join(&file), &c.to_bytes()?)?;
        entries.push(CheckpointEntry {
            epoch: c.epoch,
            file,
            test_accuracy: c.metrics.test_accuracy,
        });
    }
    let best = run
        .best_record()
        .ok_or_else(|| Error::Empty("run has no epochs".into()))?;
    let model = run
        .final_checkpoint()
        .map(|c| c.spec.name())
        .unwrap_or_default();
    let summary = RunSummary {
        schema_version: RUN_SCHEMA_VERSION,
        config_hash: run.config_hash.clone(),
        role: role.to_string(),
        model,
        seed: run.seed,
        epochs: run.records.len(),
        final_test_accuracy: run.final_accuracy().unwrap_or(f64::NAN),
        best_epoch: best.epoch,
        best_test_accuracy: best.test_accuracy,
        teacher_accuracy,
        checkpoints: entries,
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_file(&dir.join("summary.json"), json.as_bytes())?;
    Ok(summary)
}

pub fn read_summary(dir: &Path) -> Result<RunSummary> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let s: RunSummary = serde_json::from_str(&text)?;
    if s.schema_version != RUN_SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "{}: run schema {} (expected {RUN_SCHEMA_VERSION})",
            path.display(),
            s.schema_version
        )));
    }
    Ok(s)
}

pub fn read_metrics(dir: &Path) -> Result<Vec<EpochRecord>> {
    let path = dir.join("metrics.jsonl");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Loads a finished run back, checkpoints included.
pub fn read_run(dir: &Path) -> Result<TrainedRun> {
    let summary = read_summary(dir)?;
    let records = read_metrics(dir)?;
    let checkpoints = summary
        .checkpoints
        .iter()
        .map(|e| Checkpoint::load(&dir.join(&e.file)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainedRun {
        records,
        checkpoints,
        config_hash: summary.config_hash,
        seed: summary.seed,
    })
}
