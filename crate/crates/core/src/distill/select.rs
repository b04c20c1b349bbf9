use serde::{Deserialize, Serialize};

use super::TrainedRun;
use crate::error::{Error, Result};
use crate::models::Checkpoint;

/// How the early-stopped teacher is picked from a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "epoch")]
pub enum EskdRule {
    /// Highest recorded test accuracy; ties go to the earliest epoch.
    #[default]
    BestAccuracy,
    /// The snapshot taken at a given epoch.
    FixedEpoch(usize),
}

/// Checkpoint with the maximum stored test accuracy, earliest on ties.
pub fn select_eskd_teacher(run: &TrainedRun) -> Result<&Checkpoint> {
    select_teacher(run, EskdRule::BestAccuracy)
}

pub fn select_teacher(run: &TrainedRun, rule: EskdRule) -> Result<&Checkpoint> {
    if run.checkpoints.is_empty() {
        return Err(Error::NoCheckpoints);
    }
    match rule {
        EskdRule::BestAccuracy => {
            let mut best = &run.checkpoints[0];
            for c in &run.checkpoints[1..] {
                let better = c.metrics.test_accuracy > best.metrics.test_accuracy
                    || (c.metrics.test_accuracy == best.metrics.test_accuracy && c.epoch < best.epoch);
                if better {
                    best = c;
                }
            }
            Ok(best)
        }
        EskdRule::FixedEpoch(e) => run
            .checkpoints
            .iter()
            .find(|c| c.epoch == e)
            .ok_or_else(|| Error::InvalidArgument(format!("no checkpoint at epoch {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CheckpointMetrics, ModelSpec};

    fn run(accs: &[f64]) -> TrainedRun {
        TrainedRun {
            records: Vec::new(),
            checkpoints: accs
                .iter()
                .enumerate()
                .map(|(i, &a)| Checkpoint {
                    spec: ModelSpec::wrn(16, 1, 1, 2),
                    epoch: i + 1,
                    metrics: CheckpointMetrics {
                        train_loss: 0.0,
                        test_accuracy: a,
                    },
                    config_hash: String::new(),
                    weights: vec![i as f64],
                })
                .collect(),
            config_hash: String::new(),
            seed: 0,
        }
    }

    #[test]
    fn argmax_cases() {
        assert_eq!(select_eskd_teacher(&run(&[50.0, 60.0, 70.0])).unwrap().epoch, 3);
        assert_eq!(select_eskd_teacher(&run(&[60.0, 70.0, 65.0])).unwrap().epoch, 2);
        assert_eq!(select_eskd_teacher(&run(&[70.0, 70.0])).unwrap().epoch, 1);
        assert!(matches!(select_eskd_teacher(&run(&[])), Err(Error::NoCheckpoints)));
    }

    #[test]
    fn fixed_epoch() {
        let r = run(&[1.0, 2.0, 3.0]);
        assert_eq!(select_teacher(&r, EskdRule::FixedEpoch(2)).unwrap().epoch, 2);
        assert!(select_teacher(&r, EskdRule::FixedEpoch(9)).is_err());
    }
}
