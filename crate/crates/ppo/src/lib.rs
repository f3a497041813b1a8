//! Proximal policy optimization for choosing multigrid cycle parameters:
//! dense networks with exact gradients, Adam, the clipped surrogate, the
//! training loop and checkpoint files.

pub mod adam;
pub mod checkpoint;
pub mod net;
pub mod objective;
pub mod policy;
pub mod train;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CheckpointHeader, FORMAT_VERSION};
pub use net::{Activation, DenseNet, ForwardCache, LayerSpec, Mode};
pub use objective::{discounted_returns, normalize, ppo_clip_loss};
pub use policy::{ActorPolicy, CriticNet, Sample};
pub use train::{train, write_training_log, Agent, EpisodeLog, PpoConfig, Progress, TrainOutcome, Trainer, Transition};

use hpmg_core::env::EnvError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PpoError {
    #[error("invalid network architecture: {0}")]
    InvalidArchitecture(String),
    #[error("expected input of length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("backward called without a matching forward pass")]
    MissingForwardCache,
    #[error("training-mode forward pass needs a dropout generator")]
    MissingRng,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptFile(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

impl From<std::io::Error> for PpoError {
    fn from(e: std::io::Error) -> Self {
        PpoError::Io(e.to_string())
    }
}
