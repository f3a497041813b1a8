//! Binary checkpoint: magic bytes, little-endian `u32` format version,
//! `u64` header length, JSON header, then the actor and critic parameters
//! as little-endian `f64` in layer order (weights, then bias).

use std::io::{Read, Write};
use std::path::Path;

use hpmg_core::fr::EquationKind;
use serde::{Deserialize, Serialize};

use crate::net::{DenseNet, LayerSpec};
use crate::policy::{ActorPolicy, CriticNet};
use crate::train::{Agent, PpoConfig, Progress};
use crate::PpoError;

pub const MAGIC: &[u8; 4] = b"MGRL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub order: usize,
    pub equation: EquationKind,
    pub actor_layers: Vec<LayerSpec>,
    pub critic_layers: Vec<LayerSpec>,
    pub log_std: Vec<f64>,
    pub config: PpoConfig,
    pub progress: Progress,
    /// Free-form description of the training environment.
    pub environment: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub agent: Agent,
}

impl Checkpoint {
    pub fn new(
        agent: Agent,
        order: usize,
        equation: EquationKind,
        config: PpoConfig,
        progress: Progress,
        environment: serde_json::Value,
    ) -> Self {
        let header = CheckpointHeader {
            order,
            equation,
            actor_layers: agent.actor.net.layers().to_vec(),
            critic_layers: agent.critic.net.layers().to_vec(),
            log_std: agent.actor.log_std.clone(),
            config,
            progress,
            environment,
        };
        Self { header, agent }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.n_params());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for p in self.agent.actor.net.params().iter().chain(self.agent.critic.net.params()) {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    fn n_params(&self) -> usize {
        self.agent.actor.net.n_params() + self.agent.critic.net.n_params()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PpoError> {
        let corrupt = |m: &str| PpoError::CorruptFile(m.to_string());
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(corrupt("missing checkpoint magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(PpoError::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let body = &bytes[16..];
        if header_len > body.len() as u64 {
            return Err(corrupt("truncated header"));
        }
        let (header_bytes, mut blocks) = body.split_at(header_len as usize);
        let header: CheckpointHeader =
            serde_json::from_slice(header_bytes).map_err(|e| corrupt(&format!("bad header: {e}")))?;
        let mut actor = DenseNet::new(header.actor_layers.clone()).map_err(|e| corrupt(&e.to_string()))?;
        let mut critic = DenseNet::new(header.critic_layers.clone()).map_err(|e| corrupt(&e.to_string()))?;
        if header.log_std.len() != actor.output_dim() {
            return Err(corrupt("log_std length does not match the actor output"));
        }
        let expected = 8 * (actor.n_params() + critic.n_params());
        if blocks.len() != expected {
            return Err(corrupt(&format!("expected {expected} parameter bytes, found {}", blocks.len())));
        }
        for p in actor.params_mut().iter_mut().chain(critic.params_mut().iter_mut()) {
            let (chunk, rest) = blocks.split_at(8);
            *p = f64::from_le_bytes(chunk.try_into().unwrap());
            blocks = rest;
        }
        let agent = Agent {
            actor: ActorPolicy { net: actor, log_std: header.log_std.clone() },
            critic: CriticNet { net: critic },
        };
        Ok(Self { header, agent })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PpoError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PpoError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
