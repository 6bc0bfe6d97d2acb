//! Experiment protocol: seeded repeats of SGD with and without annealing
//! refinement, parameter sweeps, and report files.

mod bench;
mod config;
mod experiment;
mod report;
pub mod stats;

use std::path::PathBuf;

use thiserror::Error;

pub use bench::{
    bench_optimizers, emit_bench, start_point, BenchConfig, BenchReport, BenchRun, BenchSummary,
    BenchTrace, Optimizer,
};
pub use config::{DataConfig, EvalSplit, ExperimentConfig, Mode, SweepConfig, SweepParam};
pub use experiment::{
    compare_ma_sa, run_arms, run_experiment, run_experiment_on, run_repeat, sweep_delta_scale,
    sweep_neighborhood, PreparedData, RepeatSeeds, SweepPoint, SweepReport,
};
pub use report::{
    emit_report, emit_sweep, summarize, write_json, Arm, ArmReport, Comparison, Environment,
    EpochRecord, EpochSummary, PairedDelta, PairedSummary, RefineRecord, RunRecord, RunReport,
};

use crate::anneal::AnnealError;
use crate::cnn::CnnError;
use crate::mnist::DataError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Cnn(#[from] CnnError),
    #[error(transparent)]
    Anneal(#[from] AnnealError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("could not serialize report: {0}")]
    Serialize(String),
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Data,
    Runtime,
    Io,
}

impl HarnessError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            HarnessError::Config(_) => ErrorCategory::Validation,
            HarnessError::Anneal(AnnealError::InvalidConfig(_)) => ErrorCategory::Validation,
            HarnessError::Cnn(CnnError::InvalidLearningRate(_)) => ErrorCategory::Validation,
            HarnessError::Data(_) => ErrorCategory::Data,
            HarnessError::Cnn(_) | HarnessError::Anneal(_) => ErrorCategory::Runtime,
            HarnessError::Io { .. } | HarnessError::Serialize(_) => ErrorCategory::Io,
        }
    }
}
