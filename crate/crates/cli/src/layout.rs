//! Where runs and evaluations live under an output directory.

use std::path::{Path, PathBuf};

use kdsense_core::models::Arch;
use kdsense_core::ExperimentConfig;

use crate::Role;

pub fn arch_slug(arch: &str) -> String {
    arch.parse::<Arch>()
        .map(|a| a.to_string())
        .unwrap_or_else(|_| arch.replace(|c: char| !c.is_ascii_alphanumeric() && c != '-', "_"))
}

/// `<out>/runs/<role>-<arch>-seed<seed>-fold<fold>-<config hash>`.
pub fn run_dir(cfg: &ExperimentConfig, role: Role, seed: u64) -> anyhow::Result<PathBuf> {
    let arch = match role {
        Role::Teacher => &cfg.models.teacher,
        Role::Scratch | Role::Student => &cfg.models.student,
    };
    Ok(cfg.output_dir.join("runs").join(format!(
        "{}-{}-seed{seed}-fold{}-{}",
        role.as_str(),
        arch_slug(arch),
        cfg.dataset.fold,
        cfg.config_hash()?
    )))
}

pub fn eval_file(run: &Path, test_aug: &str) -> PathBuf {
    run.join("eval").join(format!("{test_aug}.json"))
}

/// Write-then-rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
