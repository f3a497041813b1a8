//! Episodic environment around the multigrid solver. Each step runs one
//! V-cycle with parameters decoded from a raw action in `[-1, 1]`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fr::{initial_condition, EquationKind, EquationSpec, Mesh1D, MeshKind, SolutionField};
use crate::multigrid::{
    v_cycle_in_place, CycleBuffers, CycleStats, MgError, MultigridHierarchy, MultigridMode, VCycleParams,
    SWEEP_MAX,
};

/// Reward of a step whose cycle diverged. The episode ends there.
pub const DIVERGENCE_PENALTY: f64 = -10.0;

/// An episode counts as diverged once the residual exceeds this multiple of
/// its initial value, even while the field is still finite.
pub const DEFAULT_BLOWUP_RATIO: f64 = 1e8;

/// Virtual seconds charged per unit of work (one finest-level tendency
/// evaluation, or the equivalent on coarser levels).
pub const DEFAULT_SECONDS_PER_WORK_UNIT: f64 = 1e-3;

/// Coefficient bounds that any sampling range must stay within.
pub const A_BOUNDS: (f64, f64) = (0.2, 1.0);
pub const NU_BOUNDS: (f64, f64) = (0.01, 1.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("episode already finished; call reset")]
    EpisodeFinished,
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
    #[error("action has {found} channels, expected {expected}")]
    ActionDimension { expected: usize, found: usize },
    #[error("action channel {index} = {value} outside [-1, 1]")]
    ActionOutOfRange { index: usize, value: f64 },
    #[error(transparent)]
    Multigrid(#[from] MgError),
}

/// Time charged to a V-cycle when computing the reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Clock {
    /// Measured seconds of the cycle.
    Wall,
    /// Weighted tendency evaluations times a fixed cost, so rewards are
    /// reproducible across machines.
    Virtual { seconds_per_unit: f64 },
}

impl Clock {
    pub fn virtual_default() -> Self {
        Self::Virtual { seconds_per_unit: DEFAULT_SECONDS_PER_WORK_UNIT }
    }

    pub fn charge(&self, stats: &CycleStats) -> f64 {
        match *self {
            Clock::Wall => stats.wall_time,
            Clock::Virtual { seconds_per_unit } => stats.work_units * seconds_per_unit,
        }
    }

    fn charge_work(&self, work_units: f64, wall: f64) -> f64 {
        match *self {
            Clock::Wall => wall,
            Clock::Virtual { seconds_per_unit } => work_units * seconds_per_unit,
        }
    }
}

/// Everything needed to start one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub eq: EquationSpec,
    pub order: usize,
    pub n_elements: usize,
    pub mesh_kind: MeshKind,
    pub mesh_seed: u64,
    pub mode: MultigridMode,
    pub tol: f64,
    pub max_steps: usize,
    pub sweep_max: usize,
    pub clock: Clock,
    pub blowup_ratio: f64,
}

impl EpisodeConfig {
    pub fn new(eq: EquationSpec, order: usize) -> Self {
        Self {
            eq,
            order,
            n_elements: 32,
            mesh_kind: MeshKind::Nonuniform,
            mesh_seed: 0,
            mode: MultigridMode::Hp,
            tol: 1e-9,
            max_steps: 2000,
            sweep_max: SWEEP_MAX,
            clock: Clock::virtual_default(),
            blowup_ratio: DEFAULT_BLOWUP_RATIO,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        if !self.eq.is_valid() {
            return bad("equation coefficients must be finite with nu >= 0");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        if self.sweep_max == 0 {
            return bad("sweep_max must be at least 1");
        }
        if !(self.blowup_ratio > 1.0) {
            return bad("blowup_ratio must exceed 1");
        }
        if let Clock::Virtual { seconds_per_unit } = self.clock {
            if !(seconds_per_unit > 0.0) {
                return bad("virtual clock cost must be positive");
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> Mesh1D {
        Mesh1D::build(self.mesh_kind, self.n_elements, self.mesh_seed)
    }

    pub fn action_dim(&self) -> usize {
        action_dim(self.order)
    }

    pub fn state_dim(&self) -> usize {
        state_dim(self.eq.kind)
    }
}

/// Raw action channels for order `p`: `p` pre-sweeps, `p - 1` post-sweeps and
/// the correction fraction.
pub fn action_dim(order: usize) -> usize {
    2 * order
}

/// Length of the state tuple.
pub fn state_dim(kind: EquationKind) -> usize {
    match kind {
        EquationKind::LinearAdvectionDiffusion => 4,
        EquationKind::Burgers => 3,
    }
}

/// Ranges the training loop draws coefficients from: `a` uniformly, `nu`
/// log-uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRanges {
    pub a: (f64, f64),
    pub nu: (f64, f64),
}

impl Default for CoefficientRanges {
    fn default() -> Self {
        Self { a: A_BOUNDS, nu: NU_BOUNDS }
    }
}

impl CoefficientRanges {
    pub fn validate(&self) -> Result<(), EnvError> {
        let within = |(lo, hi): (f64, f64), (min, max): (f64, f64)| lo <= hi && lo >= min && hi <= max;
        if !within(self.a, A_BOUNDS) || !within(self.nu, NU_BOUNDS) {
            return Err(EnvError::InvalidConfig(format!(
                "coefficient ranges {self:?} must lie within a in {A_BOUNDS:?}, nu in {NU_BOUNDS:?}"
            )));
        }
        Ok(())
    }

    pub fn sample(&self, kind: EquationKind, rng: &mut impl Rng) -> EquationSpec {
        let nu = if self.nu.0 < self.nu.1 {
            rng.random_range(self.nu.0.ln()..=self.nu.1.ln()).exp()
        } else {
            self.nu.0
        };
        match kind {
            EquationKind::LinearAdvectionDiffusion => {
                let a = if self.a.0 < self.a.1 { rng.random_range(self.a.0..=self.a.1) } else { self.a.0 };
                EquationSpec::linear(a, nu)
            }
            EquationKind::Burgers => EquationSpec::burgers(nu),
        }
    }
}

/// Observation handed to the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    /// `(r_prev - r) / r_prev`.
    pub rel_drop: f64,
    pub drop_sign: f64,
    pub coeffs: Vec<f64>,
}

impl EnvState {
    pub fn new(rel_drop: f64, coeffs: Vec<f64>) -> Self {
        let drop_sign = if rel_drop < 0.0 { -1.0 } else { 1.0 };
        Self { rel_drop, drop_sign, coeffs }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.rel_drop, self.drop_sign];
        v.extend_from_slice(&self.coeffs);
        v
    }

    pub fn len(&self) -> usize {
        2 + self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Actor output, every channel in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAction {
    values: Vec<f64>,
}

impl RawAction {
    pub fn new(values: Vec<f64>) -> Result<Self, EnvError> {
        for (index, &value) in values.iter().enumerate() {
            if !(-1.0..=1.0).contains(&value) {
                return Err(EnvError::ActionOutOfRange { index, value });
            }
        }
        Ok(Self { values })
    }

    /// Clamps every channel into `[-1, 1]`; NaN becomes `-1`.
    pub fn clamped(values: &[f64]) -> Self {
        let values = values.iter().map(|v| if v.is_nan() { -1.0 } else { v.clamp(-1.0, 1.0) }).collect();
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[inline]
fn unit(v: f64) -> f64 {
    (v + 1.0) / 2.0
}

/// Maps a raw channel to a sweep count in `[1, sweep_max]`, rounding half up.
pub fn decode_sweeps(v: f64, sweep_max: usize) -> usize {
    let s = (1.0 + unit(v) * (sweep_max as f64 - 1.0) + 0.5).floor();
    (s as usize).clamp(1, sweep_max)
}

/// Maps a raw channel to a correction fraction in `[0.05, 1]`.
pub fn decode_alpha(v: f64) -> f64 {
    (0.05 + unit(v) * 0.95).clamp(0.05, 1.0)
}

pub fn decode_action(raw: &RawAction, order: usize, sweep_max: usize) -> Result<VCycleParams, EnvError> {
    let v = raw.values();
    if v.len() != action_dim(order) {
        return Err(EnvError::ActionDimension { expected: action_dim(order), found: v.len() });
    }
    Ok(VCycleParams {
        pre_sweeps: v[..order].iter().map(|&x| decode_sweeps(x, sweep_max)).collect(),
        post_sweeps: v[order..2 * order - 1].iter().map(|&x| decode_sweeps(x, sweep_max)).collect(),
        alpha_finest: decode_alpha(v[2 * order - 1]),
    })
}

/// Inverse of `decode_action`: the raw channels that decode to `params`.
/// Sweep counts above `sweep_max` and fractions below 0.05 saturate.
pub fn encode_action(params: &VCycleParams, sweep_max: usize) -> RawAction {
    let sweep = |s: usize| {
        if sweep_max <= 1 {
            0.0
        } else {
            2.0 * (s.clamp(1, sweep_max) - 1) as f64 / (sweep_max - 1) as f64 - 1.0
        }
    };
    let mut v: Vec<f64> = params.pre_sweeps.iter().chain(&params.post_sweeps).map(|&s| sweep(s)).collect();
    v.push(2.0 * (params.alpha_finest - 0.05) / 0.95 - 1.0);
    RawAction::clamped(&v)
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    Diverged,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: EnvState,
    pub reward: f64,
    pub done: bool,
    pub termination: Option<Termination>,
    pub residual: f64,
    /// Charged seconds of this step.
    pub elapsed: f64,
}

/// One line of an exported episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub state: Vec<f64>,
    pub params: VCycleParams,
    pub reward: f64,
    pub residual: f64,
}

/// Solver wrapped as an episodic environment.
#[derive(Debug, Clone)]
pub struct SolverEnv {
    config: EpisodeConfig,
    hierarchy: MultigridHierarchy,
    buffers: CycleBuffers,
    field: SolutionField,
    initial_residual: f64,
    residual: f64,
    state: EnvState,
    steps: usize,
    cycles: usize,
    termination: Option<Termination>,
    work_units: f64,
    rhs_evals: u64,
    wall_time: f64,
    charged_time: f64,
    trace: Option<Vec<TraceRecord>>,
}

impl SolverEnv {
    /// Builds the hierarchy, samples the initial condition and runs one
    /// baseline cycle to obtain the first residual drop.
    pub fn reset(config: EpisodeConfig) -> Result<(Self, EnvState), EnvError> {
        config.validate()?;
        let eq = config.eq;
        let hierarchy =
            MultigridHierarchy::build(config.order, config.mesh(), eq, eq.default_bc(), config.mode)?;
        let field = hierarchy.finest().project_nodal(initial_condition);
        let initial = hierarchy.finest().residual_norm(&field);
        let mut env = Self {
            state: EnvState::new(0.0, eq.coefficients()),
            config,
            buffers: CycleBuffers::new(&hierarchy),
            field,
            initial_residual: initial,
            residual: initial,
            steps: 0,
            cycles: 0,
            termination: None,
            work_units: 0.0,
            rhs_evals: 0,
            wall_time: 0.0,
            charged_time: 0.0,
            trace: None,
            hierarchy,
        };
        if initial <= env.config.tol {
            env.termination = Some(Termination::Converged);
            let state = env.state.clone();
            return Ok((env, state));
        }
        let baseline = VCycleParams::baseline(&env.hierarchy);
        match v_cycle_in_place(&mut env.field, &env.hierarchy, &baseline, &mut env.buffers, Some(initial)) {
            Ok(stats) => {
                env.record(&stats);
                env.residual = stats.residual_after;
                env.state = EnvState::new(relative_drop(initial, stats.residual_after), eq.coefficients());
                if env.residual <= env.config.tol {
                    env.termination = Some(Termination::Converged);
                }
            }
            Err(MgError::Diverged { rhs_evals, work_units }) => {
                env.rhs_evals += rhs_evals;
                env.work_units += work_units;
                env.termination = Some(Termination::Diverged);
            }
            Err(e) => return Err(e.into()),
        }
        let state = env.state.clone();
        Ok((env, state))
    }

    /// Keeps a trace of every subsequent step for JSON-lines export.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    fn record(&mut self, stats: &CycleStats) {
        self.cycles += 1;
        self.rhs_evals += stats.rhs_evals;
        self.work_units += stats.work_units;
        self.wall_time += stats.wall_time;
        self.charged_time += self.config.clock.charge(stats);
    }

    /// Runs one V-cycle with the decoded action.
    pub fn step(&mut self, raw: &RawAction) -> Result<StepResult, EnvError> {
        if self.termination.is_some() {
            return Err(EnvError::EpisodeFinished);
        }
        let params = decode_action(raw, self.config.order, self.config.sweep_max)?;
        self.step_with_params(params)
    }

    /// Runs one V-cycle with explicit parameters.
    pub fn step_with_params(&mut self, params: VCycleParams) -> Result<StepResult, EnvError> {
        if self.termination.is_some() {
            return Err(EnvError::EpisodeFinished);
        }
        params.validate(self.config.order, self.config.sweep_max)?;
        self.steps += 1;
        let previous = self.residual;
        let outcome = v_cycle_in_place(&mut self.field, &self.hierarchy, &params, &mut self.buffers, Some(previous));
        let (reward, elapsed) = match outcome {
            Ok(stats) => {
                self.record(&stats);
                self.residual = stats.residual_after;
                let rel = relative_drop(previous, stats.residual_after);
                self.state = EnvState::new(rel, self.config.eq.coefficients());
                let elapsed = self.config.clock.charge(&stats);
                if self.residual > self.config.blowup_ratio * self.initial_residual {
                    self.termination = Some(Termination::Diverged);
                    (DIVERGENCE_PENALTY, elapsed)
                } else {
                    if self.residual <= self.config.tol {
                        self.termination = Some(Termination::Converged);
                    } else if self.steps >= self.config.max_steps {
                        self.termination = Some(Termination::MaxSteps);
                    }
                    (reward(previous, stats.residual_after, elapsed), elapsed)
                }
            }
            Err(MgError::Diverged { rhs_evals, work_units }) => {
                self.rhs_evals += rhs_evals;
                self.work_units += work_units;
                let elapsed = self.config.clock.charge_work(work_units, 0.0);
                self.charged_time += elapsed;
                self.termination = Some(Termination::Diverged);
                (DIVERGENCE_PENALTY, elapsed)
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceRecord {
                step: self.steps,
                state: self.state.to_vec(),
                params,
                reward,
                residual: self.residual,
            });
        }
        Ok(StepResult {
            state: self.state.clone(),
            reward,
            done: self.termination.is_some(),
            termination: self.termination,
            residual: self.residual,
            elapsed,
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn hierarchy(&self) -> &MultigridHierarchy {
        &self.hierarchy
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn field(&self) -> &SolutionField {
        &self.field
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn is_done(&self) -> bool {
        self.termination.is_some()
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    /// Agent steps taken since reset (the seeding cycle is not a step).
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Completed V-cycles including the seeding cycle.
    pub fn cycles(&self) -> usize {
        self.cycles
    }

    pub fn work_units(&self) -> f64 {
        self.work_units
    }

    pub fn rhs_evals(&self) -> u64 {
        self.rhs_evals
    }

    pub fn wall_time(&self) -> f64 {
        self.wall_time
    }

    /// Seconds charged by the configured clock over the whole episode.
    pub fn charged_time(&self) -> f64 {
        self.charged_time
    }

    pub fn trace(&self) -> &[TraceRecord] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn write_trace(&self, mut out: impl Write) -> std::io::Result<()> {
        for rec in self.trace() {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// `(previous - current) / previous`.
pub fn relative_drop(previous: f64, current: f64) -> f64 {
    (previous - current) / previous
}

/// Residual drop relative to the previous residual per charged second.
pub fn reward(previous: f64, current: f64, elapsed: f64) -> f64 {
    relative_drop(previous, current) / elapsed
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decode_examples() {
        assert_eq!(decode_sweeps(-1.0, 10), 1);
        assert_eq!(decode_sweeps(1.0, 10), 10);
        assert_eq!(decode_sweeps(0.0, 10), 6);
        assert_eq!(decode_alpha(1.0), 1.0);
        assert!((decode_alpha(-1.0) - 0.05).abs() < 1e-15);

        let raw = RawAction::new(vec![-1.0, 0.0, 1.0, 1.0]).unwrap();
        let p = decode_action(&raw, 2, 10).unwrap();
        assert_eq!(p.pre_sweeps, vec![1, 6]);
        assert_eq!(p.post_sweeps, vec![10]);
        assert_eq!(p.alpha_finest, 1.0);
        assert_eq!(
            decode_action(&raw, 3, 10),
            Err(EnvError::ActionDimension { expected: 6, found: 4 })
        );
    }

    #[test]
    fn raw_action_bounds() {
        assert!(matches!(RawAction::new(vec![0.0, 1.5]), Err(EnvError::ActionOutOfRange { index: 1, .. })));
        assert!(RawAction::new(vec![f64::NAN]).is_err());
        assert_eq!(RawAction::clamped(&[2.0, -3.0, f64::NAN, 0.2]).values(), &[1.0, -1.0, -1.0, 0.2]);
    }

    #[test]
    fn reward_examples() {
        assert!((reward(1e-3, 5e-4, 0.1) - 5.0).abs() < 1e-12);
        assert!(reward(1e-3, 2e-3, 0.1) < 0.0);
        assert_eq!(reward(1e-3, 1e-3, 0.1), 0.0);
    }

    #[test]
    fn state_encoding() {
        let s = EnvState::new(0.0, vec![0.5, 0.5]);
        assert_eq!(s.drop_sign, 1.0);
        assert_eq!(s.to_vec(), vec![0.0, 1.0, 0.5, 0.5]);
        assert_eq!(EnvState::new(-0.2, vec![0.1]).drop_sign, -1.0);
        assert_eq!(state_dim(EquationKind::LinearAdvectionDiffusion), 4);
        assert_eq!(state_dim(EquationKind::Burgers), 3);
    }

    #[test]
    fn coefficient_ranges() {
        assert!(CoefficientRanges::default().validate().is_ok());
        assert!(CoefficientRanges { a: (0.1, 1.0), nu: (0.01, 1.0) }.validate().is_err());
        assert!(CoefficientRanges { a: (0.2, 1.0), nu: (0.01, 2.0) }.validate().is_err());
        let r = CoefficientRanges::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let eq = r.sample(EquationKind::LinearAdvectionDiffusion, &mut rng);
            assert!((0.2..=1.0).contains(&eq.a) && (0.01..=1.0).contains(&eq.nu));
        }
        let fixed = CoefficientRanges { a: (0.5, 0.5), nu: (0.3, 0.3) };
        assert_eq!(fixed.sample(EquationKind::LinearAdvectionDiffusion, &mut rng), EquationSpec::linear(0.5, 0.3));
    }

    use rand::SeedableRng;

    proptest! {
        #[test]
        fn decode_is_monotone(x in -1.0f64..=1.0, y in -1.0f64..=1.0, smax in 1usize..=20) {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(decode_sweeps(lo, smax) <= decode_sweeps(hi, smax));
            prop_assert!(decode_alpha(lo) <= decode_alpha(hi));
            let s = decode_sweeps(x, smax);
            prop_assert!(s >= 1 && s <= smax);
            let a = decode_alpha(x);
            prop_assert!(a > 0.0 && a <= 1.0);
        }

        #[test]
        fn encode_inverts_decode(
            order in 1usize..=5,
            smax in 2usize..=12,
            seed in proptest::collection::vec((1usize..=12, 0usize..=12), 5),
            alpha in 0.05f64..=1.0,
        ) {
            let pre: Vec<usize> = seed[..order].iter().map(|s| s.0.min(smax)).collect();
            let post: Vec<usize> = seed[..order - 1].iter().map(|s| s.1.clamp(1, smax)).collect();
            let p = VCycleParams { pre_sweeps: pre, post_sweeps: post, alpha_finest: alpha };
            let back = decode_action(&encode_action(&p, smax), order, smax).unwrap();
            prop_assert_eq!(&back.pre_sweeps, &p.pre_sweeps);
            prop_assert_eq!(&back.post_sweeps, &p.post_sweeps);
            prop_assert!((back.alpha_finest - alpha).abs() < 1e-12);
        }

        #[test]
        fn reward_sign_matches_drop(prev in 1e-12f64..1e3, cur in 0.0f64..1e3, dt in 1e-6f64..10.0) {
            let r = reward(prev, cur, dt);
            let drop = prev - cur;
            prop_assert_eq!(r > 0.0, drop > 0.0);
            prop_assert_eq!(r < 0.0, drop < 0.0);
        }
    }
}
