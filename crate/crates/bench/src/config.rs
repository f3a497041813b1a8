//! Campaign configuration: a JSON document with a schema version, plus
//! command-line overrides that take precedence over the file.

use std::path::{Path, PathBuf};

use hpmg_core::env::{Clock, CoefficientRanges};
use hpmg_core::fr::{EquationKind, EquationSpec, MeshKind};
use hpmg_core::multigrid::MultigridMode;
use hpmg_ppo::PpoConfig;
use serde::{Deserialize, Serialize};

use crate::BenchError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub a: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub kind: MeshKind,
    pub n_elements: usize,
    pub seed: u64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self { kind: MeshKind::Nonuniform, n_elements: 32, seed: 7 }
    }
}

/// Environment and optimizer settings for `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSpec {
    pub ppo: PpoConfig,
    pub mesh_kind: MeshKind,
    pub n_elements: usize,
    pub mode: MultigridMode,
    /// V-cycles per training episode.
    pub max_steps: usize,
    pub ranges: CoefficientRanges,
    pub clock: Clock,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        Self {
            ppo: PpoConfig::default(),
            mesh_kind: MeshKind::Nonuniform,
            n_elements: 32,
            mode: MultigridMode::Hp,
            max_steps: 64,
            ranges: CoefficientRanges::default(),
            clock: Clock::virtual_default(),
        }
    }
}

/// Order-of-accuracy study against the analytic steady profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub a: f64,
    pub nu: f64,
    pub sizes: Vec<usize>,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self { a: 1.0, nu: 0.1, sizes: vec![8, 16, 32, 64] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub schema_version: u32,
    pub equation: EquationKind,
    pub coefficients: Vec<Coefficients>,
    pub orders: Vec<usize>,
    pub mesh: MeshSpec,
    pub mode: MultigridMode,
    pub tol: f64,
    pub max_cycles: usize,
    pub repetitions: usize,
    /// Report weighted evaluation counts instead of measured seconds.
    pub virtual_clock: bool,
    /// Worker threads for campaign cases; `None` uses all cores.
    pub threads: Option<usize>,
    /// Checkpoint written by `train` and read by `evaluate`; defaults to
    /// `checkpoint.mgrl` in the output directory.
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
    pub training: TrainingSpec,
    pub convergence: ConvergenceSpec,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            equation: EquationKind::LinearAdvectionDiffusion,
            coefficients: vec![
                Coefficients { a: 1.0, nu: 0.01 },
                Coefficients { a: 0.5, nu: 0.5 },
                Coefficients { a: 0.2, nu: 0.8 },
            ],
            orders: vec![2],
            mesh: MeshSpec::default(),
            mode: MultigridMode::Hp,
            tol: 1e-9,
            max_cycles: 20_000,
            repetitions: 1,
            virtual_clock: false,
            threads: None,
            checkpoint: None,
            out: PathBuf::from("hpmg-out"),
            training: TrainingSpec::default(),
            convergence: ConvergenceSpec::default(),
        }
    }
}

/// Command-line values that replace the corresponding config entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub order: Option<usize>,
    pub a: Option<f64>,
    pub nu: Option<f64>,
    pub mesh: Option<MeshKind>,
    pub mode: Option<MultigridMode>,
    pub n_elements: Option<usize>,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub threads: Option<usize>,
    pub virtual_clock: bool,
}

impl CampaignConfig {
    /// Parses a JSON document. The `schema_version` key is mandatory; every
    /// other key falls back to its default.
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| BenchError::Config(format!("invalid JSON: {e}")))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => return Err(BenchError::Config(format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}"))),
            None => return Err(BenchError::Config("missing integer `schema_version`".into())),
        }
        serde_json::from_value(value).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = o.order {
            self.orders = vec![p];
        }
        for c in &mut self.coefficients {
            if let Some(a) = o.a {
                c.a = a;
            }
            if let Some(nu) = o.nu {
                c.nu = nu;
            }
        }
        let mut unique: Vec<Coefficients> = Vec::with_capacity(self.coefficients.len());
        for c in &self.coefficients {
            if !unique.contains(c) {
                unique.push(*c);
            }
        }
        self.coefficients = unique;
        if let Some(m) = o.mesh {
            self.mesh.kind = m;
            self.training.mesh_kind = m;
        }
        if let Some(m) = o.mode {
            self.mode = m;
            self.training.mode = m;
        }
        if let Some(n) = o.n_elements {
            self.mesh.n_elements = n;
            self.training.n_elements = n;
        }
        if let Some(s) = o.seed {
            self.mesh.seed = s;
            self.training.ppo.seed = s;
        }
        if let Some(e) = o.episodes {
            self.training.ppo.episodes = e;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(c) = &o.checkpoint {
            self.checkpoint = Some(c.clone());
        }
        if let Some(t) = o.threads {
            self.threads = Some(t);
        }
        if o.virtual_clock {
            self.virtual_clock = true;
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.coefficients.is_empty() {
            return bad("the coefficient grid is empty".into());
        }
        if self.orders.is_empty() || self.orders.contains(&0) {
            return bad("orders must be a non-empty list of degrees >= 1".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive".into());
        }
        if self.max_cycles == 0 {
            return bad("max_cycles must be at least 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        for c in &self.coefficients {
            if !self.equation_spec(*c).is_valid() {
                return bad(format!("invalid coefficients a={} nu={}", c.a, c.nu));
            }
        }
        check_mesh(self.mesh.n_elements, self.mode)?;
        check_mesh(self.training.n_elements, self.training.mode)?;
        if self.training.max_steps == 0 {
            return bad("training.max_steps must be at least 1".into());
        }
        self.training.ppo.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        self.training.ranges.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        if self.convergence.sizes.len() < 2 || self.convergence.sizes.contains(&0) {
            return bad("convergence.sizes needs at least two positive element counts".into());
        }
        Ok(())
    }

    pub fn equation_spec(&self, c: Coefficients) -> EquationSpec {
        match self.equation {
            EquationKind::LinearAdvectionDiffusion => EquationSpec::linear(c.a, c.nu),
            EquationKind::Burgers => EquationSpec::burgers(c.nu),
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join("checkpoint.mgrl"))
    }
}

fn check_mesh(n: usize, mode: MultigridMode) -> Result<(), BenchError> {
    if n == 0 {
        return Err(BenchError::Config("meshes need at least one element".into()));
    }
    if mode == MultigridMode::Hp && n % 8 != 0 {
        return Err(BenchError::Config(format!("h/p mode needs an element count divisible by 8, got {n}")));
    }
    Ok(())
}
