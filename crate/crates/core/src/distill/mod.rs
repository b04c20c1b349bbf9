//! Distillation loss, learning-rate schedule, training loops and
//! early-stopped teacher selection.

mod loss;
mod rundir;
mod schedule;
mod select;
mod train;

pub use loss::{batch_loss, kd_loss, softmax_with_temperature, BatchLoss, KdConfig, KdLoss, KdMode};
pub use rundir::{
    checkpoint_file, read_metrics, read_run, read_summary, write_run, CheckpointEntry, RunSummary,
    RUN_SCHEMA_VERSION,
};
pub use schedule::{lr_at, TrainingSchedule};
pub use select::{select_eskd_teacher, select_teacher, EskdRule};
pub use train::{predict_windows, train_kd, train_scratch, EpochRecord, TrainOptions, TrainedRun};
