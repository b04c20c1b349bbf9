use std::collections::BTreeMap;

use ndarray::{s, Axis};
use serde::{Deserialize, Serialize};

use super::{ActivityId, Labels, Recording, Window};
use crate::error::{Error, Result};

/// How a window that spans more than one activity id is labelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolicy {
    /// Windows crossing an activity change are discarded.
    #[default]
    PureOnly,
    /// Majority per-timestep label; ties go to the smaller activity id.
    Majority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_len: usize,
    pub step: usize,
    #[serde(default)]
    pub label_policy: LabelPolicy,
    /// When set, windows whose label is not listed are dropped.
    #[serde(default)]
    pub class_set: Option<Vec<ActivityId>>,
}

impl WindowConfig {
    pub fn new(window_len: usize, step: usize) -> Self {
        Self {
            window_len,
            step,
            label_policy: LabelPolicy::PureOnly,
            class_set: None,
        }
    }

    /// Fraction of each window shared with its successor.
    pub fn overlap(&self) -> f64 {
        if self.step >= self.window_len {
            0.0
        } else {
            (self.window_len - self.step) as f64 / self.window_len as f64
        }
    }
}

/// Number of windows produced by a sliding window over `len` samples,
/// before any label filtering.
pub fn window_count(len: usize, window_len: usize, step: usize) -> usize {
    if window_len == 0 || step == 0 || window_len > len {
        0
    } else {
        (len - window_len) / step + 1
    }
}

/// Keeps every `factor`-th sample (plain decimation, no low-pass filter).
pub fn downsample(rec: &Recording, factor: usize) -> Result<Recording> {
    if factor < 1 {
        return Err(Error::InvalidArgument(format!(
            "downsample factor must be >= 1, got {factor}"
        )));
    }
    if factor == 1 {
        return Ok(rec.clone());
    }
    let channels = rec.channels.slice(s![.., ..;factor]).to_owned();
    let labels = match &rec.labels {
        Labels::PerTimestep(v) => Labels::PerTimestep(v.iter().step_by(factor).copied().collect()),
        Labels::PerRecording(id) => Labels::PerRecording(*id),
    };
    Ok(Recording {
        subject_id: rec.subject_id.clone(),
        channels,
        sample_rate_hz: rec.sample_rate_hz / factor as f64,
        labels,
    })
}

/// Slides a window of `window_len` samples with stride `step` over the
/// recording. Starts are `0, step, 2*step, ...`; a window longer than the
/// recording yields no windows.
pub fn segment_windows(rec: &Recording, cfg: &WindowConfig) -> Result<Vec<Window>> {
    if cfg.window_len < 1 || cfg.step < 1 {
        return Err(Error::InvalidArgument(format!(
            "window_len and step must be >= 1 (got {} / {})",
            cfg.window_len, cfg.step
        )));
    }
    let n = window_count(rec.len(), cfg.window_len, cfg.step);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let start = i * cfg.step;
        let end = start + cfg.window_len;
        let Some(label) = window_label(&rec.labels, start, end, cfg.label_policy) else {
            continue;
        };
        if let Some(classes) = &cfg.class_set {
            if !classes.contains(&label) {
                continue;
            }
        }
        out.push(Window {
            data: rec.channels.slice(s![.., start..end]).to_owned(),
            label,
            subject_id: rec.subject_id.clone(),
        });
    }
    Ok(out)
}

fn window_label(
    labels: &Labels,
    start: usize,
    end: usize,
    policy: LabelPolicy,
) -> Option<ActivityId> {
    let v = match labels {
        Labels::PerRecording(id) => return Some(*id),
        Labels::PerTimestep(v) => &v[start..end],
    };
    match policy {
        LabelPolicy::PureOnly => {
            let first = v[0];
            v.iter().all(|&l| l == first).then_some(first)
        }
        LabelPolicy::Majority => {
            let mut counts: BTreeMap<ActivityId, usize> = BTreeMap::new();
            for &l in v {
                *counts.entry(l).or_default() += 1;
            }
            // BTreeMap iterates ascending, so `>` keeps the smallest id on ties.
            let mut best: Option<(ActivityId, usize)> = None;
            for (id, c) in counts {
                if best.is_none_or(|(_, bc)| c > bc) {
                    best = Some((id, c));
                }
            }
            best.map(|(id, _)| id)
        }
    }
}

/// Stacks windows into a (batch, channels, time) array.
pub(crate) fn stack_windows<'a>(
    windows: impl IntoIterator<Item = &'a ndarray::Array2<f64>>,
) -> ndarray::Array3<f64> {
    let views: Vec<_> = windows.into_iter().map(|w| w.view()).collect();
    ndarray::stack(Axis(0), &views).expect("windows share one shape")
}
