//! Experiment orchestration: scenario batches, recovery curves, AUC and
//! output files.

mod config;
mod curve;
mod output;
mod run;

pub use config::{preset, Experiment, ExperimentConfig, NamedPlanner, PRESET_NAMES};
pub use curve::{auc, auc_points, day_grid, mean_and_se, mean_curve, RecoveryCurve};
pub use output::{
    batch_dir, emit_experiment, emit_outputs, CURVES_FILE, MEAN_CURVES_FILE, SUMMARY_FILE,
};
pub use run::{
    run_batch, run_experiment, run_recovery, sample_case, sample_cases, scenario_seed,
    select_action, BatchResult, DecisionCost, PlannerResult, RecoveryRun, ScenarioCase,
    ScenarioInfo, StageRecord,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::hazard::HazardError;
use crate::network::NetworkError;
use crate::planner::PlannerError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("invalid configuration {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid network {path}: {source}")]
    NetworkFile { path: PathBuf, source: NetworkError },
    #[error("invalid hazard {path}: {source}")]
    HazardFile { path: PathBuf, source: HazardError },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Hazard(#[from] HazardError),
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("planner `{name}`: {source}")]
    Planner { name: String, source: PlannerError },
    #[error("sampling scenario {scenario_id} (seed {seed}) failed: {source}")]
    ScenarioSampling {
        scenario_id: usize,
        seed: u64,
        source: HazardError,
    },
    #[error("scenario {scenario_id} (seed {seed}) under planner `{planner}` failed: {source}")]
    Scenario {
        scenario_id: usize,
        seed: u64,
        planner: String,
        source: PlannerError,
    },
}

impl HarnessError {
    /// Whether the error stems from bad input rather than a failed run.
    pub fn is_config(&self) -> bool {
        match self {
            HarnessError::Read { .. }
            | HarnessError::Json { .. }
            | HarnessError::NetworkFile { .. }
            | HarnessError::HazardFile { .. }
            | HarnessError::Network(_)
            | HarnessError::Hazard(_)
            | HarnessError::Config(_)
            | HarnessError::Planner { .. } => true,
            HarnessError::Scenario { source, .. } => source.is_config(),
            HarnessError::Write { .. }
            | HarnessError::Csv { .. }
            | HarnessError::ScenarioSampling { .. } => false,
        }
    }
}
