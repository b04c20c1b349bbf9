//! Accuracy, calibration, significance, timing and report rendering.

mod calibration;
mod metrics;
mod report;
mod stats;
mod timing;

pub use calibration::ece;
pub use metrics::{
    accuracy, accuracy_from_logits, argmax, confusion_matrix, predictions, EvalReport, Provenance,
};
pub use report::{
    emit_report, format_cell, render_csv, render_curves_svg, render_markdown, Curve,
    ExperimentSet, GridCell, METHOD_NOTES, MISSING_CELL, REPORT_SCHEMA_VERSION,
};
pub use stats::{aggregate, welch_ttest, Aggregate, TTest};
pub use timing::{
    timing_benchmark, timing_benchmark_model, DeviceProfile, TimingResult, MIN_TIMING_SAMPLES,
};
