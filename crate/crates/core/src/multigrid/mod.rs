//! h/p-multigrid acceleration of the steady flux-reconstruction problem.

pub mod cycle;
pub mod hierarchy;
pub mod transfer;

pub use cycle::{
    solve_single_grid, solve_to_steady, v_cycle, v_cycle_in_place, CycleBuffers, CycleStats,
    FixedParams, ParamsProvider, SingleGridOutcome, SolveStatus, SteadyOutcome, VCycleParams,
    BASELINE_ALPHA, SWEEP_MAX,
};
pub use hierarchy::{Level, LevelKind, MultigridHierarchy, MultigridMode, H_LEVELS};
pub use transfer::{prolong_h, prolong_p, restrict_h, restrict_p, HTransfer, PTransfer, Transfer};

use crate::fr::FrError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MgError {
    #[error("invalid mesh for the hierarchy: {0}")]
    InvalidMesh(String),
    #[error("multigrid needs polynomial order >= 1, got {0}")]
    InvalidOrder(usize),
    #[error("invalid cycle parameters: {0}")]
    InvalidParams(String),
    #[error("solution diverged")]
    Diverged { rhs_evals: u64, work_units: f64 },
    #[error("no convergence after {cycles} cycles (residual {residual:e})")]
    MaxCyclesExceeded { cycles: usize, residual: f64 },
    #[error(transparent)]
    Fr(#[from] FrError),
}
