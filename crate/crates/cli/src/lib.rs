//! Configuration parsing, file formats and orchestration behind the
//! `stochabs` command-line tool.

pub mod config;
pub mod files;
pub mod run;

pub use config::{parse_config, parse_config_file, ComputeSet, ProblemConfig};
pub use run::{run_audit, run_simulate, run_synth, run_volume, CliError};
