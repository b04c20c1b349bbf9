//! 1-D WideResNet-d-k and ResNet18(k) classifiers for `(batch, channels,
//! time)` inputs.
//!
//! Layout, with kernel size 3 unless noted:
//!
//! * `wrn`: conv(in -> 16), three groups of `(depth - 4) / 6` pre-activation
//!   blocks at widths `16k, 32k, 64k` (temporal stride 2 entering groups 2
//!   and 3), BN-ReLU, global average pooling, linear head.
//! * `resnet18`: kernel-7 stem conv(in -> k)-BN-ReLU, four stages of two basic
//!   blocks at widths `k, 2k, 4k, 8k` (stride 2 entering stages 2-4), global
//!   average pooling, linear head.
//!
//! Convolutions carry no bias; batch norm contributes two trainable scalars
//! per channel. With `in_channels = 3`, `n_classes = 14` this reproduces the
//! published parameter counts of the model zoo exactly (WRN16-1: 61,374,
//! ResNet18(8): 62,182, ...).

mod blocks;
mod checkpoint;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{
    global_avg_pool, global_avg_pool_backward, relu, relu_backward, BatchNorm1d, Conv1d, Linear,
    Param, Parameters,
};
use blocks::{BasicBlock, PreActBlock};

pub use checkpoint::{Checkpoint, CheckpointMetrics, CHECKPOINT_FORMAT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Resnet18,
    Wrn,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    /// WRN depth (16, 28, ...); always 18 for ResNet18.
    pub depth: usize,
    pub width: usize,
    pub in_channels: usize,
    pub n_classes: usize,
    #[serde(default = "default_kernel")]
    pub kernel_size: usize,
}

fn default_kernel() -> usize {
    3
}

const RESNET_STEM_KERNEL: usize = 7;

impl ModelSpec {
    pub fn wrn(depth: usize, width: usize, in_channels: usize, n_classes: usize) -> Self {
        Self {
            family: ModelFamily::Wrn,
            depth,
            width,
            in_channels,
            n_classes,
            kernel_size: 3,
        }
    }

    pub fn resnet18(width: usize, in_channels: usize, n_classes: usize) -> Self {
        Self {
            family: ModelFamily::Resnet18,
            depth: 18,
            width,
            in_channels,
            n_classes,
            kernel_size: 3,
        }
    }

    /// Parses an architecture name (`wrn16-3`, `resnet18-8`, `resnet18(8)`)
    /// and binds it to a data geometry.
    pub fn from_arch(arch: &str, in_channels: usize, n_classes: usize) -> Result<Self> {
        let arch: Arch = arch.parse()?;
        let spec = match arch.family {
            ModelFamily::Wrn => Self::wrn(arch.depth, arch.width, in_channels, n_classes),
            ModelFamily::Resnet18 => Self::resnet18(arch.width, in_channels, n_classes),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.width == 0 {
            return bad("width must be >= 1".into());
        }
        if self.in_channels == 0 || self.n_classes == 0 {
            return bad("in_channels and n_classes must be >= 1".into());
        }
        if self.kernel_size % 2 == 0 {
            return bad(format!("kernel size {} must be odd", self.kernel_size));
        }
        match self.family {
            ModelFamily::Wrn if self.depth < 10 || (self.depth - 4) % 6 != 0 => {
                bad(format!("wrn depth {} must satisfy (depth - 4) % 6 == 0", self.depth))
            }
            ModelFamily::Resnet18 if self.depth != 18 => {
                bad(format!("resnet18 depth must be 18, got {}", self.depth))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self.family {
            ModelFamily::Wrn => format!("WRN{}-{}", self.depth, self.width),
            ModelFamily::Resnet18 => format!("ResNet18({})", self.width),
        }
    }

    /// Total temporal downsampling of the network.
    pub fn total_stride(&self) -> usize {
        match self.family {
            ModelFamily::Wrn => 4,
            ModelFamily::Resnet18 => 8,
        }
    }
}

/// Architecture name without data geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arch {
    pub family: ModelFamily,
    pub depth: usize,
    pub width: usize,
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let bad = || Error::InvalidSpec(format!("unrecognised architecture {s:?}"));
        if let Some(rest) = lower.strip_prefix("wrn") {
            let (d, k) = rest.trim_start_matches('-').split_once('-').ok_or_else(bad)?;
            return Ok(Arch {
                family: ModelFamily::Wrn,
                depth: d.parse().map_err(|_| bad())?,
                width: k.parse().map_err(|_| bad())?,
            });
        }
        if let Some(rest) = lower.strip_prefix("resnet18") {
            let k = rest.trim_start_matches(['-', '(']).trim_end_matches(')');
            return Ok(Arch {
                family: ModelFamily::Resnet18,
                depth: 18,
                width: k.parse().map_err(|_| bad())?,
            });
        }
        Err(bad())
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            ModelFamily::Wrn => write!(f, "wrn{}-{}", self.depth, self.width),
            ModelFamily::Resnet18 => write!(f, "resnet18-{}", self.width),
        }
    }
}

#[derive(Debug, Clone)]
enum Body {
    Wrn {
        stem: Conv1d,
        blocks: Vec<PreActBlock>,
        final_bn: BatchNorm1d,
    },
    Resnet {
        stem: Conv1d,
        stem_bn: BatchNorm1d,
        blocks: Vec<BasicBlock>,
    },
}

/// A built network. Training-mode `forward` caches activations for
/// `backward`; `predict` is the read-only inference path.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    body: Body,
    head: Linear,
    cache: Option<ForwardCache>,
}

#[derive(Debug, Clone)]
struct ForwardCache {
    /// Pre-ReLU activation feeding the pooling layer (WRN) or after the stem
    /// BN (ResNet).
    pre_relu: Array3<f64>,
    pooled_len: usize,
}

/// Builds an untrained model with all weights zero; see [`Model::init`].
pub fn build(spec: &ModelSpec) -> Result<Model> {
    spec.validate()?;
    let k = spec.kernel_size;
    let pad = k / 2;
    let body = match spec.family {
        ModelFamily::Wrn => {
            let n = (spec.depth - 4) / 6;
            let widths = [16, 16 * spec.width, 32 * spec.width, 64 * spec.width];
            let mut blocks = Vec::with_capacity(3 * n);
            for g in 0..3 {
                let stride = if g == 0 { 1 } else { 2 };
                for i in 0..n {
                    let in_ch = if i == 0 { widths[g] } else { widths[g + 1] };
                    blocks.push(PreActBlock::new(in_ch, widths[g + 1], if i == 0 { stride } else { 1 }, k));
                }
            }
            Body::Wrn {
                stem: Conv1d::new(spec.in_channels, 16, k, 1, pad),
                blocks,
                final_bn: BatchNorm1d::new(widths[3]),
            }
        }
        ModelFamily::Resnet18 => {
            let w = spec.width;
            let widths = [w, w, 2 * w, 4 * w, 8 * w];
            let mut blocks = Vec::with_capacity(8);
            for s in 0..4 {
                let stride = if s == 0 { 1 } else { 2 };
                blocks.push(BasicBlock::new(widths[s], widths[s + 1], stride, k));
                blocks.push(BasicBlock::new(widths[s + 1], widths[s + 1], 1, k));
            }
            Body::Resnet {
                stem: Conv1d::new(spec.in_channels, w, RESNET_STEM_KERNEL, 1, RESNET_STEM_KERNEL / 2),
                stem_bn: BatchNorm1d::new(w),
                blocks,
            }
        }
    };
    let feat = match spec.family {
        ModelFamily::Wrn => 64 * spec.width,
        ModelFamily::Resnet18 => 8 * spec.width,
    };
    Ok(Model {
        spec: spec.clone(),
        body,
        head: Linear::new(feat, spec.n_classes),
        cache: None,
    })
}

/// Number of trainable scalars.
pub fn count_parameters(model: &dyn Parameters) -> usize {
    let mut n = 0;
    model.visit_params(&mut |p| n += p.len());
    n
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Builds and initialises from a seed.
    pub fn new(spec: &ModelSpec, seed: u64) -> Result<Self> {
        let mut m = build(spec)?;
        m.init(seed);
        Ok(m)
    }

    /// He-normal convolutions, BN at (1, 0), uniform linear head, all drawn
    /// from a ChaCha stream seeded by `seed`.
    pub fn init(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match &mut self.body {
            Body::Wrn { stem, blocks, .. } => {
                stem.init(&mut rng);
                for b in blocks {
                    b.convs_mut().for_each(|c| c.init(&mut rng));
                }
            }
            Body::Resnet { stem, blocks, .. } => {
                stem.init(&mut rng);
                for b in blocks {
                    b.convs_mut().for_each(|c| c.init(&mut rng));
                }
            }
        }
        self.head.init(&mut rng);
    }

    pub fn head_mut(&mut self) -> &mut Linear {
        &mut self.head
    }

    fn check_input(&self, x: &Array3<f64>) -> Result<()> {
        let (_, c, t) = x.dim();
        if c != self.spec.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} channels, got {c}",
                self.spec.in_channels
            )));
        }
        if t == 0 {
            return Err(Error::ShapeMismatch("empty time axis".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model input".into()));
        }
        Ok(())
    }

    /// Inference-mode logits `(B, n_classes)` using running BN statistics.
    pub fn predict(&self, x: &Array3<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let feat = match &self.body {
            Body::Wrn {
                stem,
                blocks,
                final_bn,
            } => {
                let mut h = stem.infer(x);
                for b in blocks {
                    h = b.infer(&h);
                }
                relu(&final_bn.infer(&h))
            }
            Body::Resnet {
                stem,
                stem_bn,
                blocks,
            } => {
                let mut h = relu(&stem_bn.infer(&stem.infer(x)));
                for b in blocks {
                    h = b.infer(&h);
                }
                h
            }
        };
        Ok(self.head.infer(&global_avg_pool(&feat)))
    }

    /// Training-mode forward pass (batch statistics, caches kept).
    pub fn forward_train(&mut self, x: &Array3<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let (feat, pre_relu) = match &mut self.body {
            Body::Wrn {
                stem,
                blocks,
                final_bn,
            } => {
                let mut h = stem.forward(x);
                for b in blocks.iter_mut() {
                    h = b.forward(&h);
                }
                let a = final_bn.forward(&h);
                (relu(&a), a)
            }
            Body::Resnet {
                stem,
                stem_bn,
                blocks,
            } => {
                let a = stem_bn.forward(&stem.forward(x));
                let mut h = relu(&a);
                for b in blocks.iter_mut() {
                    h = b.forward(&h);
                }
                (h, a)
            }
        };
        let pooled_len = feat.dim().2;
        let logits = self.head.forward(&global_avg_pool(&feat));
        self.cache = Some(ForwardCache {
            pre_relu,
            pooled_len,
        });
        Ok(logits)
    }

    /// Accumulates parameter gradients for `dL/dlogits`; returns `dL/dx`.
    pub fn backward(&mut self, dlogits: &Array2<f64>) -> Array3<f64> {
        let cache = self.cache.take().expect("backward without forward_train");
        let dpool = self.head.backward(dlogits);
        let dfeat = global_avg_pool_backward(&dpool, cache.pooled_len);
        match &mut self.body {
            Body::Wrn {
                stem,
                blocks,
                final_bn,
            } => {
                let mut g = final_bn.backward(&relu_backward(&cache.pre_relu, &dfeat));
                for b in blocks.iter_mut().rev() {
                    g = b.backward(&g);
                }
                stem.backward(&g)
            }
            Body::Resnet {
                stem,
                stem_bn,
                blocks,
            } => {
                let mut g = dfeat;
                for b in blocks.iter_mut().rev() {
                    g = b.backward(&g);
                }
                stem.backward(&stem_bn.backward(&relu_backward(&cache.pre_relu, &g)))
            }
        }
    }

    pub fn zero_grad(&mut self) {
        self.visit_params_mut(&mut |p| p.zero_grad());
    }

    pub fn num_parameters(&self) -> usize {
        count_parameters(self)
    }

    /// Flat weights: trainable parameters, then BN running statistics.
    pub fn weights(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit_params(&mut |p| out.extend_from_slice(&p.value));
        self.visit_buffers(&mut |b| out.extend_from_slice(b));
        out
    }

    pub fn load_weights(&mut self, weights: &[f64]) -> Result<()> {
        let mut expected = 0;
        self.visit_params(&mut |p| expected += p.len());
        self.visit_buffers(&mut |b| expected += b.len());
        if expected != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} expects {expected} weights, got {}",
                self.spec.name(),
                weights.len()
            )));
        }
        let mut off = 0;
        self.visit_params_mut(&mut |p| {
            let n = p.len();
            p.value.copy_from_slice(&weights[off..off + n]);
            off += n;
        });
        self.visit_buffers_mut(&mut |b| {
            let n = b.len();
            b.copy_from_slice(&weights[off..off + n]);
            off += n;
        });
        Ok(())
    }

    /// SHA-256 over the little-endian weight bytes.
    pub fn weights_digest(&self) -> String {
        digest_weights(&self.weights())
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let mut m = build(&ckpt.spec)?;
        m.load_weights(&ckpt.weights)?;
        Ok(m)
    }
}

pub fn digest_weights(weights: &[f64]) -> String {
    let mut h = Sha256::new();
    for w in weights {
        h.update(w.to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl Parameters for Model {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param)) {
        match &self.body {
            Body::Wrn {
                stem,
                blocks,
                final_bn,
            } => {
                stem.visit_params(f);
                blocks.iter().for_each(|b| b.visit_params(f));
                final_bn.visit_params(f);
            }
            Body::Resnet {
                stem,
                stem_bn,
                blocks,
            } => {
                stem.visit_params(f);
                stem_bn.visit_params(f);
                blocks.iter().for_each(|b| b.visit_params(f));
            }
        }
        self.head.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        match &mut self.body {
            Body::Wrn {
                stem,
                blocks,
                final_bn,
            } => {
                stem.visit_params_mut(f);
                blocks.iter_mut().for_each(|b| b.visit_params_mut(f));
                final_bn.visit_params_mut(f);
            }
            Body::Resnet {
                stem,
                stem_bn,
                blocks,
            } => {
                stem.visit_params_mut(f);
                stem_bn.visit_params_mut(f);
                blocks.iter_mut().for_each(|b| b.visit_params_mut(f));
            }
        }
        self.head.visit_params_mut(f);
    }

    fn visit_buffers<'a>(&'a self, f: &mut dyn FnMut(&'a [f64])) {
        match &self.body {
            Body::Wrn {
                blocks, final_bn, ..
            } => {
                blocks.iter().for_each(|b| b.visit_buffers(f));
                final_bn.visit_buffers(f);
            }
            Body::Resnet {
                stem_bn, blocks, ..
            } => {
                stem_bn.visit_buffers(f);
                blocks.iter().for_each(|b| b.visit_buffers(f));
            }
        }
    }

    fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        match &mut self.body {
            Body::Wrn {
                blocks, final_bn, ..
            } => {
                blocks.iter_mut().for_each(|b| b.visit_buffers_mut(f));
                final_bn.visit_buffers_mut(f);
            }
            Body::Resnet {
                stem_bn, blocks, ..
            } => {
                stem_bn.visit_buffers_mut(f);
                blocks.iter_mut().for_each(|b| b.visit_buffers_mut(f));
            }
        }
    }
}
