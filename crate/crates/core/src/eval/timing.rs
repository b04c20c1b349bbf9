use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataio::Window;
use crate::error::{Error, Result};
use crate::models::{Checkpoint, Model};

pub const MIN_TIMING_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    /// Free-form label such as `"cpu"` or a host name.
    pub label: String,
    pub warmup: usize,
}

impl Default for DeviceProfile {
    fn default() -> Self {
        Self {
            label: "cpu".into(),
            warmup: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingResult {
    pub model: String,
    pub device: String,
    pub n_samples: usize,
    pub warmup: usize,
    pub batch_size: usize,
    pub total_seconds: f64,
    pub avg_ms_per_sample: f64,
    pub note: String,
}

/// Wall-clock inference time at batch size 1 over `windows`, after
/// `profile.warmup` untimed passes. Meant to run with nothing else on the
/// machine.
pub fn timing_benchmark_model(
    model: &Model,
    windows: &[Window],
    profile: &DeviceProfile,
) -> Result<TimingResult> {
    if windows.len() < MIN_TIMING_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "timing needs at least {MIN_TIMING_SAMPLES} samples, got {}",
            windows.len()
        )));
    }
    let inputs: Vec<_> = windows
        .iter()
        .map(|w| w.data.clone().insert_axis(ndarray::Axis(0)))
        .collect();
    for x in inputs.iter().cycle().take(profile.warmup) {
        std::hint::black_box(model.predict(x)?);
    }
    let start = Instant::now();
    for x in &inputs {
        std::hint::black_box(model.predict(x)?);
    }
    let total = start.elapsed().as_secs_f64();
    Ok(TimingResult {
        model: model.spec().name(),
        device: profile.label.clone(),
        n_samples: inputs.len(),
        warmup: profile.warmup,
        batch_size: 1,
        total_seconds: total,
        avg_ms_per_sample: 1000.0 * total / inputs.len() as f64,
        note: "measured sequentially at batch size 1; assumes no concurrent load".into(),
    })
}

pub fn timing_benchmark(
    checkpoint: &Checkpoint,
    windows: &[Window],
    profile: &DeviceProfile,
) -> Result<TimingResult> {
    timing_benchmark_model(&Model::from_checkpoint(checkpoint)?, windows, profile)
}
