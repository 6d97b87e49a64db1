//! Configuration parsing, experiment dispatch and CSV output for the
//! `levyflow` binary.

pub mod config;
pub mod csv;
mod run;

pub use config::{
    parse_config, parse_config_with, ConfigError, Experiment, ExperimentConfig, SchemeTag, DEFAULT_SEED, SEED_ENV,
};
pub use csv::{config_from_csv, Cell, CsvArtifact};
pub use run::{run_experiment, schema};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{experiment}: {source}")]
    Run { experiment: Experiment, source: crate::Error },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}
