//! Config-driven experiment runner: detection sweeps, stationarity and
//! O-substep checks, and the Gaussian channel-estimation problem. Results go
//! to CSV, progress to the log.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod tasks;

pub use config::{preset_names, run_table1_preset, ExperimentConfig, Task};
pub use error::{CliError, CliResult};
pub use output::{emit_csv, read_csv, write_csv, ResultRow};
pub use tasks::{run_channel_toy, run_detect_sweep, run_fdt_test, run_stationary_test, run_task};
