//! `cspwave` command-line pipeline: synthetic data generation, artifact
//! rejection, CSP training, waveform search, evaluation and SVG reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod plot;

pub use commands::{cmd_plot, cmd_preprocess, cmd_run, cmd_synth, configure_threads};
pub use config::{PathsConfig, RunConfig, WindowsConfig};
pub use error::CliError;
pub use pipeline::RunReport;
