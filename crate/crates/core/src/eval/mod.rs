//! Metrics, calibration, paired tests, effect sizes, bootstrap intervals and
//! the robustness window over a prior sweep.

mod calibration;
mod metrics;
mod stats;
mod window;

pub use calibration::{brier, ece, nll_at_temperature, temperature_scale, Temperature, DEFAULT_ECE_BINS};
pub use metrics::{auroc, average_precision, confusion_metrics, metric_report, Confusion, MetricReport};
pub use stats::{
    bootstrap_ci, cliffs_delta, holm_adjust, mean_std, quantile_sorted, wilcoxon_signed_rank, CliffMagnitude,
    CliffsDelta, WilcoxonMethod, WilcoxonResult,
};
pub use window::{robustness_window, RobustWindow, SweepPoint, SweepResult, SweepRow, DEFAULT_WINDOW_EPSILON, DEFAULT_W_STAR};
