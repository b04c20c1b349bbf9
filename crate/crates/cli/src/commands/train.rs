use std::path::{Path, PathBuf};

use anyhow::Context;
use kdsense_core::distill::{read_run, read_summary, select_teacher, train_kd, train_scratch, write_run, KdMode, RunSummary};
use kdsense_core::ExperimentConfig;

use super::prepare;
use crate::layout::run_dir;
use crate::{user_error, Role};

pub struct TrainOutcome {
    pub dir: PathBuf,
    pub summary: RunSummary,
    pub skipped: bool,
}

pub fn run(
    cfg: &ExperimentConfig,
    role: Role,
    seed: Option<u64>,
    teacher: Option<&Path>,
) -> anyhow::Result<TrainOutcome> {
    let seed = seed.unwrap_or(cfg.seeds[0]);
    let dir = run_dir(cfg, role, seed)?;
    let hash = cfg.config_hash()?;
    if let Ok(summary) = read_summary(&dir) {
        if summary.config_hash == hash {
            log::info!("{} already complete, skipping", dir.display());
            return Ok(TrainOutcome {
                dir,
                summary,
                skipped: true,
            });
        }
    }

    let ds = prepare::load(cfg)?;
    if cfg.dataset.fold >= ds.splits.len() {
        return Err(user_error(format!(
            "fold {} requested but the cache has {} split(s)",
            cfg.dataset.fold,
            ds.splits.len()
        )));
    }
    let split = ds.materialize(cfg.dataset.fold)?;
    let (teacher_spec, student_spec) = cfg.model_specs(&split)?;
    let opts = cfg.train_options()?;
    log::info!(
        "training {} ({}) seed {seed} on split {} -> {}",
        role.as_str(),
        match role {
            Role::Teacher => &cfg.models.teacher,
            _ => &cfg.models.student,
        },
        ds.splits[cfg.dataset.fold].name,
        dir.display()
    );

    let (run, teacher_accuracy) = match role {
        Role::Teacher => (
            train_scratch(&teacher_spec, &split, &cfg.schedule, &cfg.augment.teacher, seed, &opts)?,
            None,
        ),
        Role::Scratch => (
            train_scratch(&student_spec, &split, &cfg.schedule, &cfg.augment.student, seed, &opts)?,
            None,
        ),
        Role::Student => {
            let tdir = match teacher {
                Some(t) => t.to_path_buf(),
                None => run_dir(cfg, Role::Teacher, seed)?,
            };
            let trun = read_run(&tdir).map_err(|e| {
                user_error(format!(
                    "student training needs a finished teacher run at {} ({e}); \
                     train one with `--role teacher` or pass --teacher",
                    tdir.display()
                ))
            })?;
            let ck = match cfg.kd.mode {
                KdMode::Eskd => select_teacher(&trun, cfg.training.eskd_rule)?,
                KdMode::Full => trun
                    .final_checkpoint()
                    .ok_or(kdsense_core::Error::NoCheckpoints)?,
            };
            log::info!(
                "distilling from {} epoch {} ({:.2}% test accuracy)",
                tdir.display(),
                ck.epoch,
                ck.metrics.test_accuracy
            );
            let run = train_kd(&student_spec, ck, &split, &cfg.schedule, &cfg.kd, &cfg.augment.student, seed, &opts)?;
            (run, Some(ck.metrics.test_accuracy))
        }
    };
    let summary = write_run(&dir, &run, &cfg.canonical_json()?, role.as_str(), teacher_accuracy)
        .with_context(|| format!("writing run {}", dir.display()))?;
    log::info!(
        "done: final {:.2}%, best {:.2}% at epoch {}",
        summary.final_test_accuracy,
        summary.best_test_accuracy,
        summary.best_epoch
    );
    Ok(TrainOutcome {
        dir,
        summary,
        skipped: false,
    })
}
