//! Scoring of TDOA estimators: inlier ratios, threshold curves, SNR and
//! reverberation sweeps, sliding-window inference and CSV reports.

mod metrics;
mod report;
mod sweep;
mod window;

pub use metrics::{
    evaluate_pairs, evaluate_recording, inlier_ratio, residual_histogram, threshold_curve, threshold_grid, PairOutcome,
    INLIER_THRESHOLD_M,
};
pub use report::{format_g6, histogram_csv, EvalReport, ReportRow};
pub use sweep::{sample_sweep_scenario, snr_sweep, sweep_grid, t60_sweep, SweepKind, SweepResult, SweepSettings};
pub use window::{sliding_window_infer, window_count, window_hop, WindowEstimate};
