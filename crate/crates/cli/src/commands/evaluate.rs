use std::path::{Path, PathBuf};

use anyhow::Context;
use kdsense_core::augment::{augment_window, AugmentKind};
use kdsense_core::config::ENV_CACHE;
use kdsense_core::dataio::read_cache;
use kdsense_core::distill::{predict_windows, read_run, read_summary, select_teacher, KdMode};
use kdsense_core::eval::{EvalReport, Provenance};
use kdsense_core::{ExperimentConfig, Model};
use serde::Serialize;

use crate::layout::{eval_file, write_atomic};
use crate::user_error;

pub const ECE_BINS: usize = 15;
pub const EVAL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
struct EvalFile<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a EvalReport,
}

/// Evaluates each run on its test split, optionally augmented by `test_aug`
/// using the bounds of the run's `augment.test` policy.
pub fn run(runs: &[PathBuf], test_aug: &str, cfg: Option<&ExperimentConfig>) -> anyhow::Result<Vec<EvalReport>> {
    let kind: AugmentKind = test_aug.parse().map_err(|e| user_error(format!("--test-aug: {e}")))?;
    let cache_dir = match cfg {
        Some(c) => c.cache_dir(),
        None => std::env::var_os(ENV_CACHE).map(PathBuf::from).ok_or_else(|| {
            user_error(format!("evaluate needs --config or {ENV_CACHE} to locate the dataset cache"))
        })?,
    };
    let ds = read_cache(&cache_dir).map_err(|e| {
        user_error(format!("no dataset cache at {} ({e}); run prepare-data first", cache_dir.display()))
    })?;
    runs.iter()
        .map(|dir| {
            evaluate_run(dir, kind, &ds)
                .with_context(|| format!("evaluating {}", dir.display()))
        })
        .collect()
}

fn evaluate_run(
    dir: &Path,
    kind: AugmentKind,
    ds: &kdsense_core::dataio::PreparedDataset,
) -> anyhow::Result<EvalReport> {
    let summary = read_summary(dir)
        .map_err(|e| user_error(format!("{} is not a finished run: {e}", dir.display())))?;
    let text = std::fs::read_to_string(dir.join("config.json"))?;
    let cfg = ExperimentConfig::from_canonical_json(&text)?;
    if ds.config_hash != cfg.dataset_hash()? {
        return Err(user_error(format!(
            "the dataset cache does not match the data this run was trained on (cache {}, run {})",
            ds.config_hash,
            cfg.dataset_hash()?
        )));
    }
    let run = read_run(dir)?;
    // students and scratch runs report their last epoch; a teacher is judged
    // by the snapshot that would be handed to an ESKD student
    let ck = if summary.role == "teacher" && cfg.kd.mode == KdMode::Eskd {
        select_teacher(&run, cfg.training.eskd_rule)?
    } else {
        run.final_checkpoint().ok_or(kdsense_core::Error::NoCheckpoints)?
    };
    let split = ds.materialize(cfg.dataset.fold)?;
    let mut policy = cfg.augment.test.clone();
    policy.kind = kind;
    policy.validate()?;
    let view: Vec<_> = split
        .test
        .iter()
        .enumerate()
        .map(|(i, w)| augment_window(w, &policy, summary.seed, 0, i as u32))
        .collect();
    let labels: Vec<usize> = view
        .iter()
        .map(|w| split.class_index(w.label).context("test label outside class set"))
        .collect::<anyhow::Result<_>>()?;
    let model = Model::from_checkpoint(ck)?;
    let logits = predict_windows(&model, &view, cfg.training.eval_batch_size)?;
    let run_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let report = EvalReport::from_logits(
        &logits,
        &labels,
        ECE_BINS,
        Provenance {
            run_id,
            checkpoint_epoch: ck.epoch,
            config_hash: summary.config_hash.clone(),
            test_view: kind.to_string(),
        },
    )?;
    let mut json = serde_json::to_string_pretty(&EvalFile {
        schema_version: EVAL_SCHEMA_VERSION,
        report: &report,
    })?;
    json.push('\n');
    let path = eval_file(dir, kind.name());
    write_atomic(&path, json.as_bytes())?;
    log::info!(
        "{}: accuracy {:.2}%, ECE {:.2} on {} test windows ({}) -> {}",
        dir.display(),
        report.accuracy,
        report.ece,
        report.n_samples,
        kind,
        path.display()
    );
    println!("{}\t{}\t{:.4}\t{:.4}", report.provenance.run_id, kind, report.accuracy, report.ece);
    Ok(report)
}

/// Reads an eval file written by [`run`].
pub fn read_eval(path: &Path) -> anyhow::Result<EvalReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let version = v.get("schema_version").and_then(|x| x.as_u64());
    if version != Some(EVAL_SCHEMA_VERSION as u64) {
        return Err(user_error(format!("{}: unsupported eval schema {version:?}", path.display())));
    }
    Ok(serde_json::from_value(v)?)
}
