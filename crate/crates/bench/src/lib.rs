//! Experiment presets, runners, summaries and the `fekan` command line.

pub mod cli;
pub mod preset;
pub mod report;
pub mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use preset::{load_presets, Experiment, RunConfig};
pub use report::SummaryRow;
pub use run::{run_config, RunResult};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("missing reference file {path}; {hint}")]
    MissingReference { path: PathBuf, hint: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Train(#[from] fekan_core::train::TrainError),
    #[error(transparent)]
    Model(#[from] fekan_core::model::ModelError),
    #[error(transparent)]
    Separable(#[from] fekan_core::separable::SeparableError),
    #[error(transparent)]
    Physics(#[from] fekan_core::physics::PhysicsError),
    #[error(transparent)]
    Enrich(#[from] fekan_core::enrich::EnrichError),
    #[error(transparent)]
    Ntk(#[from] fekan_core::ntk::NtkError),
}
