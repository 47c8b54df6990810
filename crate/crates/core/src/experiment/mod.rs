//! The label-noise benchmark harness behind the command-line tool.

pub mod config;
pub mod report;
pub mod sweep;
pub mod synthetic;

use thiserror::Error;

use crate::booster::BoosterError;
use crate::dataset::{load_csv, DataError, TabularDataset};
use crate::metrics::MetricError;
use crate::noise::NoiseError;

pub use config::{ablation_methods, ConfigError, DatasetSource, ExperimentConfig, Grid, MethodSpec, Settings};
pub use report::{build_report, read_results, write_report, Report};
pub use sweep::{derive_seed, prepare_cell, run_sweep, summarize, write_outputs, CellResult, CellSeeds, SweepOutcome};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Booster(#[from] BoosterError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("flip at row {index} falls in the test set (gamma {gamma}, repeat {repeat})")]
    Purity { gamma: f64, repeat: usize, index: usize },
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Runtime(String),
}

impl ExperimentError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Booster(
                BoosterError::Parameter { .. } | BoosterError::Loss(_) | BoosterError::Tree(_),
            ) => 2,
            _ => 1,
        }
    }
}

/// Loads or generates the configured dataset.
pub fn load_dataset(source: &DatasetSource) -> Result<TabularDataset, ExperimentError> {
    match source {
        DatasetSource::Csv { path, schema } => Ok(load_csv(path, schema)?),
        DatasetSource::Synthetic { name, seed } => synthetic::by_name(name, *seed).ok_or_else(|| {
            ExperimentError::Config(ConfigError::Invalid {
                key: "dataset".into(),
                value: name.clone(),
                reason: "unknown synthetic fixture".into(),
            })
        }),
    }
}
