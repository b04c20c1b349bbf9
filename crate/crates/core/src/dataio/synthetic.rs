use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ActivityId, Labels, Recording};
use crate::error::{Error, Result};

/// Parameters of the seeded synthetic activity corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_classes: usize,
    pub n_subjects: usize,
    pub channels: usize,
    /// Samples per window-sized chunk; each subject gets
    /// `n_classes * windows_per_class` chunks.
    pub t: usize,
    pub windows_per_class: usize,
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    /// Amplitude of the class-specific components.
    #[serde(default = "default_separation")]
    pub separation: f64,
}

fn default_noise() -> f64 {
    0.5
}

fn default_separation() -> f64 {
    1.0
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_classes: 4,
            n_subjects: 6,
            channels: 3,
            t: 128,
            windows_per_class: 10,
            seed: 0,
            noise_std: default_noise(),
            separation: default_separation(),
        }
    }
}

/// Generates one recording per subject. Each window-sized chunk of class `c`
/// is a sinusoid at a class-specific frequency plus a class-specific bump,
/// scaled by a per-subject, per-channel gain, plus Gaussian noise. Class ids
/// are `1..=n_classes`; subject ids are `synth00`, `synth01`, ...
pub fn make_synthetic(cfg: &SyntheticConfig) -> Result<Vec<Recording>> {
    if cfg.n_classes == 0
        || cfg.n_subjects == 0
        || cfg.channels == 0
        || cfg.t == 0
        || cfg.windows_per_class == 0
    {
        return Err(Error::InvalidArgument(
            "synthetic corpus counts must all be >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_std.max(0.0)).map_err(|e| {
        Error::InvalidArgument(format!("noise_std {}: {e}", cfg.noise_std))
    })?;
    let t = cfg.t;
    let chunks = cfg.n_classes * cfg.windows_per_class;

    let mut out = Vec::with_capacity(cfg.n_subjects);
    for s in 0..cfg.n_subjects {
        let gains: Vec<f64> = (0..cfg.channels).map(|_| rng.random_range(0.8..1.2)).collect();
        let mut data = Array2::zeros((cfg.channels, chunks * t));
        let mut labels = Vec::with_capacity(chunks * t);
        for chunk in 0..chunks {
            let class = chunk / cfg.windows_per_class;
            // cycles per chunk: 1, 2.5, 4, ...
            let freq = 1.0 + 1.5 * class as f64;
            let phase = rng.random_range(0.0..2.0 * PI);
            let bump_centre = rng.random_range(0.15..0.85) * t as f64;
            let bump_width = t as f64 * (0.03 + 0.02 * (class % 3) as f64);
            let bump_sign = if class % 2 == 0 { 1.0 } else { -1.0 };
            for ch in 0..cfg.channels {
                let ch_phase = ch as f64 * PI / 3.0;
                for i in 0..t {
                    let x = i as f64;
                    let wave = (2.0 * PI * freq * x / t as f64 + phase + ch_phase).sin();
                    let bump = bump_sign * (-(x - bump_centre).powi(2) / (2.0 * bump_width.powi(2))).exp();
                    let v = cfg.separation * gains[ch] * (wave + 1.5 * bump) + noise.sample(&mut rng);
                    data[[ch, chunk * t + i]] = v;
                }
            }
            labels.extend(std::iter::repeat_n((class + 1) as ActivityId, t));
        }
        out.push(Recording {
            subject_id: format!("synth{s:02}"),
            channels: data,
            sample_rate_hz: 100.0,
            labels: Labels::PerTimestep(labels),
        });
    }
    Ok(out)
}
