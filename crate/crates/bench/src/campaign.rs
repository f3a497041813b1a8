//! Runs one parameter provider over every (order, coefficient) case of a
//! campaign and aggregates repeated runs.

use hpmg_core::env::{Clock, EpisodeConfig, SolverEnv, Termination};
use hpmg_core::fr::EquationKind;
use hpmg_core::multigrid::{VCycleParams, SWEEP_MAX};
use hpmg_ppo::Agent;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CampaignConfig, Coefficients};
use crate::BenchError;

/// Source of V-cycle parameters.
#[derive(Clone, Copy)]
pub enum Solver<'a> {
    /// Fixed default parameters on every cycle.
    Baseline,
    /// Parameters chosen by a trained policy from the current state.
    Agent(&'a Agent),
}

impl Solver<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            Solver::Baseline => "Original",
            Solver::Agent(_) => "PPO",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseSpec {
    pub equation: EquationKind,
    pub order: usize,
    pub a: f64,
    pub nu: f64,
}

/// Outcome of one solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRun {
    pub termination: Termination,
    pub cycles: usize,
    /// Charged seconds: measured, or weighted evaluations under the virtual
    /// clock.
    pub seconds: f64,
    pub work_units: f64,
    pub rhs_evals: u64,
    pub final_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub case: CaseSpec,
    pub runs: Vec<CaseRun>,
}

impl CaseReport {
    pub fn termination(&self) -> Termination {
        self.runs[0].termination
    }

    pub fn converged(&self) -> bool {
        self.runs.iter().all(|r| r.termination == Termination::Converged)
    }

    pub fn diverged(&self) -> bool {
        self.runs.iter().any(|r| r.termination == Termination::Diverged)
    }

    pub fn seconds(&self) -> f64 {
        median(self.runs.iter().map(|r| r.seconds).collect())
    }

    pub fn cycles(&self) -> f64 {
        median(self.runs.iter().map(|r| r.cycles as f64).collect())
    }

    pub fn work_units(&self) -> f64 {
        median(self.runs.iter().map(|r| r.work_units).collect())
    }

    pub fn rhs_evals(&self) -> f64 {
        median(self.runs.iter().map(|r| r.rhs_evals as f64).collect())
    }

    pub fn final_residual(&self) -> f64 {
        median(self.runs.iter().map(|r| r.final_residual).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub solver: String,
    pub tol: f64,
    pub virtual_clock: bool,
    pub cases: Vec<CaseReport>,
}

impl RunReport {
    pub fn all_diverged(&self) -> bool {
        self.cases.iter().all(CaseReport::diverged)
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty(), "median of an empty sample");
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Population standard deviation over the mean.
pub fn coefficient_of_variation(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Cases in report order: orders outermost, then coefficients.
pub fn cases(cfg: &CampaignConfig) -> Vec<CaseSpec> {
    let mut out = Vec::new();
    for &order in &cfg.orders {
        for &Coefficients { a, nu } in &cfg.coefficients {
            let a = if cfg.equation == EquationKind::Burgers { 0.0 } else { a };
            let case = CaseSpec { equation: cfg.equation, order, a, nu };
            if !out.contains(&case) {
                out.push(case);
            }
        }
    }
    out
}

pub fn episode_config(cfg: &CampaignConfig, case: &CaseSpec) -> EpisodeConfig {
    let mut c = EpisodeConfig::new(cfg.equation_spec(Coefficients { a: case.a, nu: case.nu }), case.order);
    c.n_elements = cfg.mesh.n_elements;
    c.mesh_kind = cfg.mesh.kind;
    c.mesh_seed = cfg.mesh.seed;
    c.mode = cfg.mode;
    c.tol = cfg.tol;
    c.max_steps = cfg.max_cycles;
    c.sweep_max = SWEEP_MAX;
    c.clock = if cfg.virtual_clock { Clock::virtual_default() } else { Clock::Wall };
    c
}

pub fn run_case(cfg: &CampaignConfig, case: &CaseSpec, solver: Solver) -> Result<CaseRun, BenchError> {
    let env_cfg = episode_config(cfg, case);
    if let Solver::Agent(agent) = solver {
        if agent.state_dim() != env_cfg.state_dim() || agent.action_dim() != env_cfg.action_dim() {
            return Err(BenchError::CheckpointMismatch(format!(
                "agent maps {} state values to {} actions, case P={} {} needs {} and {}",
                agent.state_dim(),
                agent.action_dim(),
                case.order,
                case.equation.as_str(),
                env_cfg.state_dim(),
                env_cfg.action_dim()
            )));
        }
    }
    let (mut env, mut state) = SolverEnv::reset(env_cfg)?;
    let baseline = VCycleParams::baseline(env.hierarchy());
    while !env.is_done() {
        let step = match solver {
            Solver::Baseline => env.step_with_params(baseline.clone())?,
            Solver::Agent(agent) => env.step(&agent.act(&state.to_vec())?)?,
        };
        state = step.state;
    }
    Ok(CaseRun {
        termination: env.termination().expect("finished episode has a termination"),
        cycles: env.cycles(),
        seconds: env.charged_time(),
        work_units: env.work_units(),
        rhs_evals: env.rhs_evals(),
        final_residual: env.residual(),
    })
}

/// Runs every case `repetitions` times on a worker pool. Results keep the
/// case order regardless of scheduling.
pub fn run_campaign(cfg: &CampaignConfig, solver: Solver) -> Result<RunReport, BenchError> {
    cfg.validate()?;
    let specs = cases(cfg);
    let jobs: Vec<(usize, usize)> =
        (0..specs.len()).flat_map(|c| (0..cfg.repetitions).map(move |r| (c, r))).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    let runs: Vec<CaseRun> =
        pool.install(|| jobs.par_iter().map(|&(c, _)| run_case(cfg, &specs[c], solver)).collect::<Result<_, _>>())?;
    let mut runs = runs.into_iter();
    let cases = specs
        .into_iter()
        .map(|case| CaseReport { case, runs: runs.by_ref().take(cfg.repetitions).collect() })
        .collect();
    Ok(RunReport { solver: solver.label().to_string(), tol: cfg.tol, virtual_clock: cfg.virtual_clock, cases })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_cv() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((coefficient_of_variation(&[1.0, 3.0]) - 0.5).abs() < 1e-15);
        assert_eq!(coefficient_of_variation(&[2.0, 2.0, 2.0]), 0.0);
    }

    #[test]
    fn all_diverged_needs_every_case() {
        let run = |termination| CaseRun { termination, cycles: 1, seconds: 1.0, work_units: 1.0, rhs_evals: 1, final_residual: 1.0 };
        let case = CaseSpec { equation: EquationKind::Burgers, order: 2, a: 0.0, nu: 0.1 };
        let mut report = RunReport {
            solver: "Original".into(),
            tol: 1e-9,
            virtual_clock: true,
            cases: vec![CaseReport { case, runs: vec![run(Termination::Diverged)] }],
        };
        assert!(report.all_diverged());
        report.cases.push(CaseReport { case, runs: vec![run(Termination::MaxSteps)] });
        assert!(!report.all_diverged());
    }

    #[test]
    fn burgers_cases_ignore_advection_speed() {
        let mut cfg = CampaignConfig::default();
        cfg.equation = EquationKind::Burgers;
        cfg.coefficients = vec![Coefficients { a: 1.0, nu: 0.1 }, Coefficients { a: 0.5, nu: 0.1 }];
        cfg.orders = vec![2, 3];
        let c = cases(&cfg);
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|k| k.a == 0.0));
    }
}
