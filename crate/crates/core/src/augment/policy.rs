use serde::{Deserialize, Serialize};

use super::transforms::{mix1, mix2, noise_injection, removal, shift};
use super::RngStream;
use crate::dataio::Window;
use crate::error::{Error, Result};

/// Stable external names: `none`, `removal`, `noise`, `shift`, `mix1`, `mix2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentKind {
    None,
    Removal,
    Noise,
    Shift,
    Mix1,
    Mix2,
}

impl AugmentKind {
    pub const ALL: [AugmentKind; 6] = [
        AugmentKind::None,
        AugmentKind::Removal,
        AugmentKind::Noise,
        AugmentKind::Shift,
        AugmentKind::Mix1,
        AugmentKind::Mix2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentKind::None => "none",
            AugmentKind::Removal => "removal",
            AugmentKind::Noise => "noise",
            AugmentKind::Shift => "shift",
            AugmentKind::Mix1 => "mix1",
            AugmentKind::Mix2 => "mix2",
        }
    }
}

impl std::str::FromStr for AugmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AugmentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown augmentation {s:?}")))
    }
}

impl std::fmt::Display for AugmentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which channels a transform touches.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "groups")]
pub enum ChannelSubsetMode {
    #[default]
    All,
    /// Each listed channel group (e.g. one IMU) is independently selected with
    /// probability 1/2 per window, at least one group always; unselected
    /// channels pass through untouched.
    RandomGroups(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPolicy {
    pub kind: AugmentKind,
    #[serde(default = "one")]
    pub max_removal_frac: f64,
    #[serde(default)]
    pub max_noise_std: f64,
    #[serde(default = "one")]
    pub max_shift_frac: f64,
    #[serde(default = "one")]
    pub apply_probability: f64,
    #[serde(default)]
    pub channels: ChannelSubsetMode,
}

fn one() -> f64 {
    1.0
}

impl AugmentationPolicy {
    pub fn none() -> Self {
        Self {
            kind: AugmentKind::None,
            max_removal_frac: 1.0,
            max_noise_std: 0.0,
            max_shift_frac: 1.0,
            apply_probability: 1.0,
            channels: ChannelSubsetMode::All,
        }
    }

    /// Bounds used for 500-sample wrist accelerometer windows: removal and
    /// shift below half the window, noise std in `[0, 0.2]`.
    pub fn geneactiv(kind: AugmentKind) -> Self {
        Self {
            kind,
            max_removal_frac: 0.5,
            max_noise_std: 0.2,
            max_shift_frac: 0.5,
            ..Self::none()
        }
    }

    /// Bounds for PAMAP2's short 100-sample windows: removal below 10%,
    /// noise std below 0.1, shift below 50%.
    pub fn pamap2(kind: AugmentKind) -> Self {
        Self {
            kind,
            max_removal_frac: 0.1,
            max_noise_std: 0.1,
            max_shift_frac: 0.5,
            ..Self::none()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == AugmentKind::None {
            return Ok(());
        }
        let in_unit = |v: f64| v > 0.0 && v <= 1.0;
        if !in_unit(self.max_removal_frac) {
            return Err(Error::InvalidArgument(format!(
                "max_removal_frac {} outside (0, 1]",
                self.max_removal_frac
            )));
        }
        if !in_unit(self.max_shift_frac) {
            return Err(Error::InvalidArgument(format!(
                "max_shift_frac {} outside (0, 1]",
                self.max_shift_frac
            )));
        }
        if !(self.max_noise_std >= 0.0 && self.max_noise_std.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "max_noise_std {} must be finite and >= 0",
                self.max_noise_std
            )));
        }
        if !in_unit(self.apply_probability) {
            return Err(Error::InvalidArgument(format!(
                "apply_probability {} outside (0, 1]",
                self.apply_probability
            )));
        }
        if let ChannelSubsetMode::RandomGroups(groups) = &self.channels {
            if groups.is_empty() || groups.iter().any(Vec::is_empty) {
                return Err(Error::InvalidArgument("empty channel group".into()));
            }
        }
        Ok(())
    }
}

/// Augments one sample with its own `(seed, epoch, index)` stream.
pub fn augment_window(
    w: &Window,
    policy: &AugmentationPolicy,
    seed: u64,
    epoch: u32,
    index: u32,
) -> Window {
    if policy.kind == AugmentKind::None {
        return w.clone();
    }
    let mut rng = RngStream::new(seed, epoch, index);
    if !rng.bernoulli(policy.apply_probability) {
        return w.clone();
    }
    let selected = match &policy.channels {
        ChannelSubsetMode::All => None,
        ChannelSubsetMode::RandomGroups(groups) => {
            let mut picked: Vec<bool> = groups.iter().map(|_| rng.bernoulli(0.5)).collect();
            if !picked.iter().any(|&p| p) {
                let g = rng.int_inclusive(0, groups.len() - 1);
                picked[g] = true;
            }
            Some(
                groups
                    .iter()
                    .zip(picked)
                    .filter(|(_, p)| *p)
                    .flat_map(|(g, _)| g.iter().copied())
                    .collect::<Vec<_>>(),
            )
        }
    };
    let p = policy;
    let out = match p.kind {
        AugmentKind::None => unreachable!(),
        AugmentKind::Removal => removal(w, &mut rng, p.max_removal_frac),
        AugmentKind::Noise => noise_injection(w, &mut rng, p.max_noise_std),
        AugmentKind::Shift => shift(w, &mut rng, p.max_shift_frac),
        AugmentKind::Mix1 => mix1(w, &mut rng, p.max_removal_frac, p.max_shift_frac),
        AugmentKind::Mix2 => mix2(
            w,
            &mut rng,
            p.max_removal_frac,
            p.max_noise_std,
            p.max_shift_frac,
        ),
    };
    match selected {
        None => out,
        Some(channels) => {
            let mut merged = w.clone();
            for c in channels.into_iter().filter(|&c| c < w.data.nrows()) {
                merged.data.row_mut(c).assign(&out.data.row(c));
            }
            merged
        }
    }
}

/// Online augmentation of a batch; sample `i` uses stream `(seed, epoch, i)`.
pub fn apply_policy(
    windows: &[Window],
    policy: &AugmentationPolicy,
    epoch: u32,
    seed: u64,
) -> Vec<Window> {
    windows
        .iter()
        .enumerate()
        .map(|(i, w)| augment_window(w, policy, seed, epoch, i as u32))
        .collect()
}
