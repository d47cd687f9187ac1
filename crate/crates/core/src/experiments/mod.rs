//! Convergence sweeps, rate fits, stationary-distance reports and their
//! file outputs.

mod config;
mod output;
mod rate;
mod sweep;

pub use config::{SweepConfig, DEFAULT_TIME_SWEEP_DELTA};
pub use output::{svg_chart, with_threads, write_report_files};
pub use rate::{FitSummary, GridPoint, RateReport, DEGENERATE_WARNING};
pub use sweep::{
    block_count, distance_report, distance_table, extrapolate_sweep, steps_for, sweep_delta, sweep_time, DistanceReport, DistanceRow,
    ExtrapolationReport, MemberError, SweepReport, DEFAULT_DICTIONARY, HORIZON_BIAS_FRACTION,
};
