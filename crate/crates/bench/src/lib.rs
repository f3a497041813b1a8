//! Campaign harness: runs the baseline and learned parameter providers over
//! coefficient grids, trains agents, and writes CSV and Markdown reports.

pub mod campaign;
pub mod commands;
pub mod config;
pub mod convergence;
pub mod report;

pub use campaign::{run_campaign, CaseReport, CaseRun, CaseSpec, RunReport, Solver};
pub use commands::{cmd_baseline, cmd_convergence, cmd_evaluate, cmd_train, Evaluation, TrainSummary};
pub use config::{CampaignConfig, Overrides, SCHEMA_VERSION};
pub use convergence::{convergence_study, ConvergenceReport};

use hpmg_core::env::EnvError;
use hpmg_core::fr::FrError;
use hpmg_ppo::PpoError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("checkpoint does not match the campaign: {0}")]
    CheckpointMismatch(String),
    #[error("every case diverged")]
    AllDiverged,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Fr(#[from] FrError),
}

impl BenchError {
    /// Process exit status: 2 for configuration errors, 3 for checkpoint
    /// mismatches, 4 when every case diverged, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::CheckpointMismatch(_) | BenchError::Ppo(PpoError::VersionMismatch { .. }) => 3,
            BenchError::AllDiverged => 4,
            _ => 1,
        }
    }
}
