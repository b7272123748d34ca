//! Experiment runner for `hartl-core`: declarative configs, run directories,
//! comparison tables, plots and grid sweeps.

pub mod compare;
pub mod config;
pub mod dataset;
pub mod plot;
pub mod run;
pub mod sweep;

pub use compare::{compare, load_run, ComparisonRow, ComparisonTable, RunRef};
pub use config::{ExperimentConfig, MethodConfig, ModelConfig, SplitConfig};
pub use plot::{plot, PlotKind};
pub use run::{run, RunOutput};
pub use sweep::{sweep, SweepGrid};

use std::path::Path;

use hartl_core::classical::ClassicalError;
use hartl_core::data::DataError;
use hartl_core::model::ModelError;
use hartl_core::synthgen::SynthError;
use hartl_core::trainers::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("{0}")]
    MissingData(String),
    #[error("{0}")]
    Usage(String),
    #[error("cannot compare runs on different splits: {0}")]
    MixedSplits(String),
    #[error("run {run} has no {column} column")]
    MissingSeries { run: String, column: &'static str },
    #[error("run {0} did not complete")]
    Incomplete(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("plot: {0}")]
    Plot(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), source }
    }

    /// 1 for invalid input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_)
            | HarnessError::MissingData(_)
            | HarnessError::Usage(_)
            | HarnessError::MixedSplits(_)
            | HarnessError::MissingSeries { .. }
            | HarnessError::Incomplete(_) => 1,
            HarnessError::Classical(
                ClassicalError::Invalid(_) | ClassicalError::Infeasible { .. } | ClassicalError::Parse { .. },
            ) => 1,
            _ => 2,
        }
    }
}
