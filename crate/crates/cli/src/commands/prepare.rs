use anyhow::Context;
use kdsense_core::dataio::{read_cache, write_cache, PreparedDataset};
use kdsense_core::ExperimentConfig;

use crate::user_error;

/// Builds the window cache unless an up-to-date one is already present.
pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<PreparedDataset> {
    let dir = cfg.cache_dir();
    let hash = cfg.dataset_hash()?;
    if let Ok(existing) = read_cache(&dir) {
        if existing.config_hash == hash {
            log::info!("cache {} is up to date ({hash})", dir.display());
            return Ok(existing);
        }
        log::info!("cache {} is stale, rebuilding", dir.display());
    }
    let ds = cfg
        .prepare_dataset()
        .context("loading raw data (paths come from the config or KDSENSE_DATA_ROOT)")?;
    write_cache(&dir, &ds).with_context(|| format!("writing cache {}", dir.display()))?;
    log::info!(
        "prepared {} windows, {} classes, {} split(s) into {}",
        ds.windows.len(),
        ds.class_set.len(),
        ds.splits.len(),
        dir.display()
    );
    for (class, n) in ds.per_class_counts() {
        log::info!("  class {class}: {n} windows");
    }
    Ok(ds)
}

/// Reads the cache for `cfg`, refusing one built from other dataset settings.
pub fn load(cfg: &ExperimentConfig) -> anyhow::Result<PreparedDataset> {
    let dir = cfg.cache_dir();
    let ds = read_cache(&dir).map_err(|e| {
        user_error(format!(
            "no usable dataset cache at {} ({e}); run `kdsense prepare-data --config ...` first",
            dir.display()
        ))
    })?;
    let want = cfg.dataset_hash()?;
    if ds.config_hash != want {
        return Err(user_error(format!(
            "dataset cache {} was built for dataset hash {}, config needs {want}; rerun prepare-data",
            dir.display(),
            ds.config_hash
        )));
    }
    Ok(ds)
}
