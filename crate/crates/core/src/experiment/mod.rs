//! Experiment plumbing: config files, run output on disk and sweeps.

pub mod config;
pub mod io;
pub mod sweep;

pub use config::{
    load_config, parse_config, AnalysisSettings, ConfigError, ExperimentConfig, SweepAxis, SweepParameter,
};
pub use io::{read_series, read_snapshots, write_record, IoError};
pub use sweep::{run_sweep, SweepReport, SweepRow};
