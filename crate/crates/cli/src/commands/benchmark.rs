use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use kdsense_core::dataio::Window;
use kdsense_core::eval::{timing_benchmark, DeviceProfile, TimingResult};
use kdsense_core::{Checkpoint, ExperimentConfig};
use ndarray::Array2;
use serde::Serialize;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::prepare;
use crate::layout::write_atomic;
use crate::user_error;

#[derive(Debug, Serialize)]
pub struct BenchmarkEntry {
    pub checkpoint: PathBuf,
    pub config_hash: String,
    pub epoch: usize,
    #[serde(flatten)]
    pub timing: TimingResult,
}

pub struct Options {
    pub device: String,
    pub samples: usize,
    pub warmup: usize,
    pub window_len: usize,
    pub out: Option<PathBuf>,
}

/// Batch-size-1 latency per checkpoint. Inputs are test windows from the
/// config's cache when one is given, random windows otherwise.
pub fn run(
    checkpoints: &[PathBuf],
    cfg: Option<&ExperimentConfig>,
    opts: &Options,
) -> anyhow::Result<Vec<BenchmarkEntry>> {
    let profile = DeviceProfile {
        label: opts.device.clone(),
        warmup: opts.warmup,
    };
    let mut results = Vec::new();
    for path in checkpoints {
        let ck = Checkpoint::load(path)
            .map_err(|e| user_error(format!("cannot load checkpoint {}: {e}", path.display())))?;
        let windows = match cfg {
            Some(cfg) => {
                let ds = prepare::load(cfg)?;
                let split = ds.materialize(cfg.dataset.fold)?;
                split.test.iter().cycle().take(opts.samples).cloned().collect()
            }
            None => random_windows(ck.spec.in_channels, opts.window_len, opts.samples),
        };
        let r = timing_benchmark(&ck, &windows, &profile)
            .with_context(|| format!("timing {}", path.display()))?;
        log::info!("{}: {:.3} ms/sample over {} samples", r.model, r.avg_ms_per_sample, r.n_samples);
        results.push(BenchmarkEntry {
            checkpoint: path.clone(),
            config_hash: ck.config_hash.clone(),
            epoch: ck.epoch,
            timing: r,
        });
    }

    let mut table = String::from(
        "| model | config hash | device | samples | warmup | ms/sample |\n|---|---|---|---|---|---|\n",
    );
    for e in &results {
        let r = &e.timing;
        writeln!(
            table,
            "| {} | {} | {} | {} | {} | {:.3} |",
            r.model, e.config_hash, r.device, r.n_samples, r.warmup, r.avg_ms_per_sample
        )?;
    }
    if let Some(e) = results.first() {
        writeln!(table, "\nNote: {}.", e.timing.note)?;
    }
    print!("{table}");
    if let Some(out) = &opts.out {
        write_atomic(&out.join("timing.md"), table.as_bytes())?;
        let json = serde_json::to_string_pretty(&results)? + "\n";
        write_atomic(&out.join("timing.json"), json.as_bytes())?;
    }
    Ok(results)
}

fn random_windows(channels: usize, len: usize, n: usize) -> Vec<Window> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    (0..n)
        .map(|_| Window {
            data: Array2::from_shape_fn((channels, len), |_| rng.random_range(-1.0..1.0)),
            label: 0,
            subject_id: String::new(),
        })
        .collect()
}
