use std::collections::BTreeMap;

use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::batch_loss;
use super::{KdConfig, TrainingSchedule};
use crate::augment::{augment_window, AugmentationPolicy};
use crate::dataio::{DatasetSplit, Window};
use crate::error::{Error, Result};
use crate::eval::argmax;
use crate::models::{Checkpoint, CheckpointMetrics, Model, ModelSpec};
use crate::nn::Sgd;

/// Metrics recorded at the end of each epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean total loss over training batches.
    pub train_loss: f64,
    pub train_ce: f64,
    /// Mean `tau^2 KL` term; zero when training without a teacher.
    pub train_kd: f64,
    /// Accuracy (%) of training-mode predictions on the (augmented) batches.
    pub train_accuracy: f64,
    /// Held-out accuracy (%) in inference mode.
    pub test_accuracy: f64,
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub records: Vec<EpochRecord>,
    /// Periodic, best-accuracy and final snapshots, ordered by epoch.
    pub checkpoints: Vec<Checkpoint>,
    pub config_hash: String,
    pub seed: u64,
}

impl TrainedRun {
    pub fn final_checkpoint(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.records.last().map(|r| r.test_accuracy)
    }

    /// Earliest epoch attaining the maximum test accuracy.
    pub fn best_record(&self) -> Option<&EpochRecord> {
        self.records
            .iter()
            .fold(None, |best: Option<&EpochRecord>, r| match best {
                Some(b) if b.test_accuracy >= r.test_accuracy => Some(b),
                _ => Some(r),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Keep a snapshot every this many epochs (0 disables periodic ones).
    pub checkpoint_every: usize,
    /// Extra epochs that must be snapshotted (fixed-epoch ESKD selection).
    #[serde(default)]
    pub checkpoint_epochs: Vec<usize>,
    pub eval_batch_size: usize,
    /// Feed the teacher un-augmented windows instead of the student's view.
    #[serde(default)]
    pub teacher_sees_clean: bool,
    #[serde(default)]
    pub config_hash: String,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            checkpoint_every: 10,
            checkpoint_epochs: Vec::new(),
            eval_batch_size: 256,
            teacher_sees_clean: false,
            config_hash: String::new(),
        }
    }
}

struct Teacher {
    model: Model,
    cfg: KdConfig,
}

/// Trains `spec` from scratch with hard-label cross-entropy.
pub fn train_scratch(
    spec: &ModelSpec,
    split: &DatasetSplit,
    sched: &TrainingSchedule,
    aug: &AugmentationPolicy,
    seed: u64,
    opts: &TrainOptions,
) -> Result<TrainedRun> {
    train_loop(spec, split, sched, sched.total_epochs, aug, None, seed, opts)
}

/// Distils `teacher` into a fresh `student_spec`. The student trains for the
/// whole budget in `Full` mode and `ceil(0.75 t)` epochs in `Eskd` mode; the
/// learning-rate schedule is always that of the full `t`.
#[allow(clippy::too_many_arguments)]
pub fn train_kd(
    student_spec: &ModelSpec,
    teacher: &Checkpoint,
    split: &DatasetSplit,
    sched: &TrainingSchedule,
    kd: &KdConfig,
    aug: &AugmentationPolicy,
    seed: u64,
    opts: &TrainOptions,
) -> Result<TrainedRun> {
    kd.validate()?;
    if teacher.spec.n_classes != student_spec.n_classes || teacher.spec.n_classes != split.n_classes()
    {
        return Err(Error::ShapeMismatch(format!(
            "class-count mismatch: teacher {}, student {}, data {}",
            teacher.spec.n_classes,
            student_spec.n_classes,
            split.n_classes()
        )));
    }
    if teacher.spec.in_channels != student_spec.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "channel mismatch: teacher {}, student {}",
            teacher.spec.in_channels, student_spec.in_channels
        )));
    }
    let teacher = Teacher {
        model: Model::from_checkpoint(teacher)?,
        cfg: *kd,
    };
    let epochs = sched.student_epoch_budget(kd.mode);
    train_loop(student_spec, split, sched, epochs, aug, Some(teacher), seed, opts)
}

fn labels_of(split: &DatasetSplit, windows: &[Window]) -> Result<Vec<usize>> {
    windows
        .iter()
        .map(|w| {
            split.class_index(w.label).ok_or_else(|| {
                Error::InvalidArgument(format!("label {} not in class set", w.label))
            })
        })
        .collect()
}

fn stack(windows: &[&Window]) -> Array3<f64> {
    crate::dataio::stack_windows(windows.iter().map(|w| &w.data))
}

/// Inference-mode logits for `windows`, in chunks.
pub fn predict_windows(model: &Model, windows: &[Window], batch: usize) -> Result<Array2<f64>> {
    let mut rows = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(batch.max(1)) {
        let refs: Vec<&Window> = chunk.iter().collect();
        let logits = model.predict(&stack(&refs))?;
        rows.extend(logits.rows().into_iter().map(|r| r.to_owned()));
    }
    let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
    if views.is_empty() {
        return Ok(Array2::zeros((0, model.spec().n_classes)));
    }
    Ok(ndarray::stack(ndarray::Axis(0), &views).expect("uniform rows"))
}

fn shuffle_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    // separate key from model init and augmentation streams
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    rng.set_stream(epoch as u64);
    rng
}

#[allow(clippy::too_many_arguments)]
fn train_loop(
    spec: &ModelSpec,
    split: &DatasetSplit,
    sched: &TrainingSchedule,
    epochs: usize,
    aug: &AugmentationPolicy,
    teacher: Option<Teacher>,
    seed: u64,
    opts: &TrainOptions,
) -> Result<TrainedRun> {
    sched.validate()?;
    aug.validate()?;
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::Empty("train and test sets must be non-empty".into()));
    }
    if spec.n_classes != split.n_classes() || spec.in_channels != split.n_channels() {
        return Err(Error::ShapeMismatch(format!(
            "{} expects {} channels / {} classes, data has {} / {}",
            spec.name(),
            spec.in_channels,
            spec.n_classes,
            split.n_channels(),
            split.n_classes()
        )));
    }
    let train_labels = labels_of(split, &split.train)?;
    let test_labels = labels_of(split, &split.test)?;
    let kd_cfg = teacher.as_ref().map(|t| t.cfg).unwrap_or_default();

    let mut model = Model::new(spec, seed)?;
    let mut opt = Sgd::new(sched.momentum, sched.weight_decay);
    let mut records = Vec::with_capacity(epochs);
    let mut periodic: BTreeMap<usize, Checkpoint> = BTreeMap::new();
    let mut best: Option<Checkpoint> = None;

    let mut order: Vec<usize> = (0..split.train.len()).collect();
    for epoch in 1..=epochs {
        let lr = sched.lr_at(epoch);
        order.sort_unstable();
        order.shuffle(&mut shuffle_rng(seed, epoch));

        let (mut sum_total, mut sum_ce, mut sum_kd) = (0.0, 0.0, 0.0);
        let mut correct = 0usize;
        for (bi, batch) in order.chunks(sched.batch_size).enumerate() {
            let augmented: Vec<Window> = batch
                .iter()
                .map(|&i| augment_window(&split.train[i], aug, seed, epoch as u32, i as u32))
                .collect();
            let refs: Vec<&Window> = augmented.iter().collect();
            let x = stack(&refs);
            let labels: Vec<usize> = batch.iter().map(|&i| train_labels[i]).collect();

            let teacher_logits = match teacher.as_ref() {
                Some(t) if opts.teacher_sees_clean => {
                    let clean: Vec<&Window> = batch.iter().map(|&i| &split.train[i]).collect();
                    Some(t.model.predict(&stack(&clean))?)
                }
                Some(t) => Some(t.model.predict(&x)?),
                None => None,
            };

            model.zero_grad();
            let logits = model.forward_train(&x)?;
            let loss = batch_loss(&logits, teacher_logits.as_ref(), &labels, &kd_cfg)?;
            if !loss.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: bi,
                    loss: loss.total,
                });
            }
            model.backward(&loss.grad);
            opt.step(&mut model, lr);

            let n = batch.len() as f64;
            sum_total += loss.total * n;
            sum_ce += loss.ce * n;
            sum_kd += loss.kd * n;
            correct += logits
                .rows()
                .into_iter()
                .zip(&labels)
                .filter(|(row, &y)| argmax(row.as_slice().unwrap()) == y)
                .count();
        }
        let n_train = split.train.len() as f64;
        let test_logits = predict_windows(&model, &split.test, opts.eval_batch_size)?;
        let test_correct = test_logits
            .rows()
            .into_iter()
            .zip(&test_labels)
            .filter(|(row, &y)| argmax(row.as_slice().unwrap()) == y)
            .count();
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: sum_total / n_train,
            train_ce: sum_ce / n_train,
            train_kd: if teacher.is_some() { sum_kd / n_train } else { 0.0 },
            train_accuracy: 100.0 * correct as f64 / n_train,
            test_accuracy: 100.0 * test_correct as f64 / split.test.len() as f64,
        };
        log::debug!(
            "epoch {epoch}/{epochs} lr={lr:.5} loss={:.4} test_acc={:.2}",
            record.train_loss,
            record.test_accuracy
        );

        let snapshot = || Checkpoint {
            spec: spec.clone(),
            epoch,
            metrics: CheckpointMetrics {
                train_loss: record.train_loss,
                test_accuracy: record.test_accuracy,
            },
            config_hash: opts.config_hash.clone(),
            weights: model.weights(),
        };
        if best
            .as_ref()
            .is_none_or(|b| record.test_accuracy > b.metrics.test_accuracy)
        {
            best = Some(snapshot());
        }
        let periodic_due = opts.checkpoint_every > 0 && epoch % opts.checkpoint_every == 0;
        if periodic_due || epoch == epochs || opts.checkpoint_epochs.contains(&epoch) {
            periodic.insert(epoch, snapshot());
        }
        records.push(record);
    }

    if let Some(b) = best {
        periodic.entry(b.epoch).or_insert(b);
    }
    Ok(TrainedRun {
        records,
        checkpoints: periodic.into_values().collect(),
        config_hash: opts.config_hash.clone(),
        seed,
    })
}
