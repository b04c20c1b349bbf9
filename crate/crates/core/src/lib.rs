//! Knowledge distillation for wearable-sensor time series.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataio`] ingests recordings (PAMAP2, generic CSV, synthetic), segments
//!   them into fixed-length windows and produces subject-disjoint splits.
//! * [`augment`] holds the time-domain transforms (removal, noise, shift and
//!   their mixes) driven by a counter-based random stream.
//! * [`nn`] and [`models`] implement 1-D WideResNet / ResNet18 classifiers
//!   with hand-written forward and backward passes.
//! * [`distill`] contains the distillation loss, learning-rate schedule and
//!   the scratch / Full-KD / ESKD training loops.
//! * [`eval`] computes accuracy, calibration error, Welch t-tests, timing and
//!   renders report tables.

pub mod augment;
pub mod config;
pub mod dataio;
pub mod distill;
pub mod error;
pub mod eval;
pub mod models;
pub mod nn;

pub use augment::{AugmentKind, AugmentationPolicy, RngStream};
pub use config::ExperimentConfig;
pub use dataio::{DatasetSplit, Recording, Window};
pub use distill::{KdConfig, KdMode, TrainedRun, TrainingSchedule};
pub use error::{Error, Result};
pub use eval::{Aggregate, EvalReport};
pub use models::{Checkpoint, Model, ModelFamily, ModelSpec};
