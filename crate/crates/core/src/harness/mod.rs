//! CLI orchestrator: dataset/model/calibration lifecycle plus the
//! simulated directional experiments, all seeded and reproducible.

mod cli;
pub mod config;
mod manifest;
mod metrics;
mod pipeline;
mod seeds;
mod sim;

pub use cli::run_cli;
pub use config::{ExperimentConfig, SimConfig, WorldRanges};
pub use manifest::{config_hash, RunManifest, MANIFEST_SCHEMA_VERSION};
pub use metrics::{MetricsReport, SuccessStats, TrialOutcome};
pub use pipeline::{
    calibrate_cmd, eval_coverage, eval_success, gen_data, plan_demo, train_cmd, CALIBRATION,
    COVERAGE_CSV, COVERAGE_JSON, DATASET_CALIB, DATASET_TRAIN, MODEL, SUCCESS_JSON, TRAIN_LOSS,
    TRAJECTORY_CSV, TRIALS_CSV,
};
pub use seeds::derive_seed;
pub use sim::{run_trial, PredictedWaypoint, TrialSetup, WaypointPredictor};

use std::path::PathBuf;

use thiserror::Error;

use crate::augment::AugmentError;
use crate::calibrate::CalibrateError;
use crate::evidential::EvidentialError;
use crate::net::NetError;
use crate::numerics::NumericsError;
use crate::planner::PlannerError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("missing artifact: {0} (run the upstream subcommand first)")]
    MissingArtifact(PathBuf),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Evidential(#[from] EvidentialError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Exit code contract: 2 for missing artifacts and config/schema
    /// problems, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::MissingArtifact(_) | HarnessError::InvalidConfig(_) => 2,
            HarnessError::Augment(AugmentError::Format(_)) => 2,
            HarnessError::Net(NetError::SchemaMismatch(_)) => 2,
            HarnessError::Calibrate(CalibrateError::Format(_)) => 2,
            _ => 1,
        }
    }
}
