//! High-order flux-reconstruction discretization of the 1D model equations.

pub mod basis;
pub mod equation;
pub mod flux;
pub mod mesh;
pub mod operator;
pub mod steady;

pub use basis::Basis;
pub use equation::{initial_condition, steady_profile, BoundaryCondition, EquationKind, EquationSpec};
pub use flux::{numerical_flux_inviscid, numerical_flux_viscous};
pub use mesh::{Mesh1D, MeshKind};
pub use operator::{stable_dt, Discretization, SolutionField, Workspace};

/// Default pseudo-time CFL number.
pub const DEFAULT_CFL: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrError {
    #[error("field contains NaN or infinite values")]
    NonFiniteInput,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("element {index} out of range for a mesh of {n_elements} elements")]
    ElementOutOfRange { index: usize, n_elements: usize },
    #[error("field shape {found:?} does not match discretization {expected:?}")]
    ShapeMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("steady linear system is singular")]
    SingularSystem,
    #[error("Newton iteration stalled at residual {residual:e}")]
    NotConverged { residual: f64 },
}
