use serde::{Deserialize, Serialize};

use super::KdMode;
use crate::error::{Error, Result};

/// SGD + step learning-rate schedule.
///
/// The rate starts at `initial_lr`, is multiplied by `first_drop_factor`
/// once after epoch `first_drop_epoch`, and by `periodic_factor` after every
/// multiple of `floor(total_epochs / 3)`. Drops compose multiplicatively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub total_epochs: usize,
    pub initial_lr: f64,
    #[serde(default = "default_first_drop_epoch")]
    pub first_drop_epoch: usize,
    pub first_drop_factor: f64,
    #[serde(default = "default_periodic_factor")]
    pub periodic_factor: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    pub batch_size: usize,
}

fn default_first_drop_epoch() -> usize {
    10
}
fn default_periodic_factor() -> f64 {
    0.1
}
fn default_momentum() -> f64 {
    0.9
}
fn default_weight_decay() -> f64 {
    5e-4
}

impl TrainingSchedule {
    /// 200 epochs from lr 0.1, halved after epoch 10, batch 64.
    pub fn geneactiv() -> Self {
        Self {
            total_epochs: 200,
            initial_lr: 0.1,
            first_drop_epoch: 10,
            first_drop_factor: 0.5,
            periodic_factor: 0.1,
            momentum: 0.9,
            weight_decay: default_weight_decay(),
            batch_size: 64,
        }
    }

    /// 180 epochs from lr 0.05, times 0.2 after epoch 10, batch 32.
    pub fn pamap2() -> Self {
        Self {
            total_epochs: 180,
            initial_lr: 0.05,
            first_drop_factor: 0.2,
            batch_size: 32,
            ..Self::geneactiv()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "total_epochs and batch_size must be >= 1".into(),
            ));
        }
        if !(self.initial_lr >= 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("initial_lr {}", self.initial_lr)));
        }
        for f in [self.first_drop_factor, self.periodic_factor] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidArgument(format!("drop factor {f} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Drop period `floor(t / 3)`; zero means no periodic drop.
    pub fn period(&self) -> usize {
        self.total_epochs / 3
    }

    /// Learning rate used during 1-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let mut lr = self.initial_lr;
        if epoch > self.first_drop_epoch {
            lr *= self.first_drop_factor;
        }
        let period = self.period();
        if period > 0 {
            let drops = epoch.saturating_sub(1) / period;
            lr *= self.periodic_factor.powi(drops as i32);
        }
        lr
    }

    /// Epochs a student trains for: all of them for Full KD, `ceil(0.75 t)`
    /// for ESKD.
    pub fn student_epoch_budget(&self, mode: KdMode) -> usize {
        match mode {
            KdMode::Full => self.total_epochs,
            KdMode::Eskd => (3 * self.total_epochs).div_ceil(4),
        }
    }
}

/// Free-function form of [`TrainingSchedule::lr_at`].
pub fn lr_at(epoch: usize, sched: &TrainingSchedule) -> f64 {
    sched.lr_at(epoch)
}
