//! Full-approximation-scheme V-cycle with RK4 smoothing on every level.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::hierarchy::{LevelKind, MultigridHierarchy};
use super::MgError;
use crate::fr::operator::rms;
use crate::fr::{Discretization, EquationKind, SolutionField, Workspace};

/// Default upper bound on any per-level sweep count.
pub const SWEEP_MAX: usize = 10;

/// Correction fraction used by the baseline on the finest level.
pub const BASELINE_ALPHA: f64 = 0.1;

/// Per-cycle parameters. Pre-sweeps cover p-levels `P..=1`, post-sweeps cover
/// p-levels `P-1..=1`; the remaining levels follow the linear pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VCycleParams {
    pub pre_sweeps: Vec<usize>,
    pub post_sweeps: Vec<usize>,
    pub alpha_finest: f64,
}

impl VCycleParams {
    /// Linear sweep pattern (one sweep on the coarsest level, one more per
    /// finer level) and `alpha = 0.1` on the finest level.
    pub fn baseline(hierarchy: &MultigridHierarchy) -> Self {
        let p = hierarchy.order();
        let n = hierarchy.n_levels();
        Self {
            pre_sweeps: (0..p).map(|l| n - l).collect(),
            post_sweeps: (1..p).map(|l| n - l).collect(),
            alpha_finest: BASELINE_ALPHA,
        }
    }

    pub fn validate(&self, order: usize, sweep_max: usize) -> Result<(), MgError> {
        let bad = |msg: String| Err(MgError::InvalidParams(msg));
        if self.pre_sweeps.len() != order {
            return bad(format!("expected {order} pre-sweep counts, got {}", self.pre_sweeps.len()));
        }
        if self.post_sweeps.len() + 1 != order {
            return bad(format!(
                "expected {} post-sweep counts, got {}",
                order - 1,
                self.post_sweeps.len()
            ));
        }
        if self
            .pre_sweeps
            .iter()
            .chain(&self.post_sweeps)
            .any(|&s| s == 0 || s > sweep_max)
        {
            return bad(format!("sweep counts must lie in [1, {sweep_max}]"));
        }
        if !(self.alpha_finest > 0.0 && self.alpha_finest <= 1.0) {
            return bad(format!("alpha {} outside (0, 1]", self.alpha_finest));
        }
        Ok(())
    }

    /// `(pre, post)` sweep counts for every level, finest first.
    pub fn level_sweeps(&self, hierarchy: &MultigridHierarchy) -> Vec<(usize, usize)> {
        let n = hierarchy.n_levels();
        let p = hierarchy.order();
        (0..n)
            .map(|l| {
                let linear = n - l;
                if l == n - 1 {
                    return (1, 0);
                }
                let controlled = hierarchy.levels[l].kind == LevelKind::P && l < p;
                let pre = if controlled { self.pre_sweeps[l] } else { linear };
                let post = if l == 0 {
                    0
                } else if controlled {
                    self.post_sweeps[l - 1]
                } else {
                    linear
                };
                (pre, post)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub residual_before: f64,
    pub residual_after: f64,
    /// Measured seconds, strictly positive.
    pub wall_time: f64,
    /// Finest-level tendency evaluations.
    pub rhs_evals: u64,
    /// Tendency evaluations over all levels, weighted by level size relative
    /// to the finest level.
    pub work_units: f64,
}

/// Reusable per-level buffers for the V-cycle.
#[derive(Debug, Clone)]
pub struct CycleBuffers {
    u: Vec<Vec<f64>>,
    restricted: Vec<Vec<f64>>,
    forcing: Vec<Vec<f64>>,
    residual: Vec<Vec<f64>>,
    tmp: Vec<Vec<f64>>,
    ws: Vec<Workspace>,
}

impl CycleBuffers {
    pub fn new(h: &MultigridHierarchy) -> Self {
        let sizes: Vec<usize> = h.levels.iter().map(|l| l.disc.n_dofs()).collect();
        let mk = || sizes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        Self {
            u: mk(),
            restricted: mk(),
            forcing: mk(),
            residual: mk(),
            tmp: mk(),
            ws: h.levels.iter().map(|l| l.disc.workspace()).collect(),
        }
    }
}

struct Counter<'a> {
    evals: Vec<u64>,
    cost: &'a [f64],
}

impl Counter<'_> {
    fn work(&self) -> f64 {
        self.evals.iter().zip(self.cost).map(|(&e, c)| e as f64 * c).sum()
    }
}

fn smooth(
    disc: &Discretization,
    cfl: f64,
    u: &mut [f64],
    forcing: Option<&[f64]>,
    sweeps: usize,
    ws: &mut Workspace,
) -> Result<u64, ()> {
    let burgers = disc.eq.kind == EquationKind::Burgers;
    let mut dt = disc.stable_dt(cfl, 1.0);
    for _ in 0..sweeps {
        if burgers {
            let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            dt = disc.stable_dt(cfl, umax);
        }
        disc.rk4_in_place(u, forcing, dt, ws);
    }
    if u.iter().all(|v| v.is_finite()) {
        Ok(4 * sweeps as u64)
    } else {
        Err(())
    }
}

/// One V-cycle applied in place. `known_residual` skips the initial residual
/// evaluation when the caller already has it. On divergence the field is
/// restored and `MgError::Diverged` returned.
pub fn v_cycle_in_place(
    field: &mut SolutionField,
    h: &MultigridHierarchy,
    params: &VCycleParams,
    buf: &mut CycleBuffers,
    known_residual: Option<f64>,
) -> Result<CycleStats, MgError> {
    let start = Instant::now();
    let n = h.n_levels();
    let sweeps = params.level_sweeps(h);
    let cost = h.relative_cost();
    let mut counter = Counter { evals: vec![0; n], cost: &cost };
    let fine = h.finest();

    let residual_before = match known_residual {
        Some(r) => r,
        None => {
            counter.evals[0] += 1;
            fine.rhs_into(field.values(), &mut buf.tmp[0], &mut buf.ws[0]);
            rms(&buf.tmp[0])
        }
    };

    buf.u[0].copy_from_slice(field.values());
    let diverged = |counter: &Counter| MgError::Diverged { rhs_evals: counter.evals[0], work_units: counter.work() };

    // Descent.
    for l in 0..n - 1 {
        let level = &h.levels[l];
        let (u_lo, u_hi) = buf.u.split_at_mut(l + 1);
        let u = &mut u_lo[l];
        let forcing = (l > 0).then(|| buf.forcing[l].as_slice());
        counter.evals[l] += smooth(&level.disc, level.cfl, u, forcing, sweeps[l].0, &mut buf.ws[l])
            .map_err(|_| diverged(&counter))?;

        level.disc.rhs_into(u, &mut buf.residual[l], &mut buf.ws[l]);
        counter.evals[l] += 1;
        if let Some(s) = forcing {
            for (r, f) in buf.residual[l].iter_mut().zip(s) {
                *r += f;
            }
        }

        let t = &h.transfers[l];
        let coarse = &h.levels[l + 1];
        t.restrict_into(u, &mut u_hi[0]);
        buf.restricted[l + 1].copy_from_slice(&u_hi[0]);
        // Coarse forcing: restricted residual minus the coarse operator at the
        // restricted solution.
        t.restrict_into(&buf.residual[l], &mut buf.forcing[l + 1]);
        coarse.disc.rhs_into(&u_hi[0], &mut buf.tmp[l + 1], &mut buf.ws[l + 1]);
        counter.evals[l + 1] += 1;
        for (f, r) in buf.forcing[l + 1].iter_mut().zip(&buf.tmp[l + 1]) {
            *f -= r;
        }
    }

    let last = n - 1;
    let level = &h.levels[last];
    counter.evals[last] += smooth(
        &level.disc,
        level.cfl,
        &mut buf.u[last],
        Some(&buf.forcing[last]),
        sweeps[last].0,
        &mut buf.ws[last],
    )
    .map_err(|_| diverged(&counter))?;

    // Ascent.
    for l in (0..n - 1).rev() {
        let alpha = if l == 0 { params.alpha_finest } else { 1.0 };
        let (u_lo, u_hi) = buf.u.split_at_mut(l + 1);
        let (tmp_lo, tmp_hi) = buf.tmp.split_at_mut(l + 1);
        let correction = &mut tmp_hi[0];
        for ((c, uc), ur) in correction.iter_mut().zip(&u_hi[0]).zip(&buf.restricted[l + 1]) {
            *c = uc - ur;
        }
        h.transfers[l].prolong_into(correction, &mut tmp_lo[l]);
        let u = &mut u_lo[l];
        for (v, c) in u.iter_mut().zip(&tmp_lo[l]) {
            *v += alpha * c;
        }
        let level = &h.levels[l];
        let forcing = (l > 0).then(|| buf.forcing[l].as_slice());
        counter.evals[l] += smooth(&level.disc, level.cfl, u, forcing, sweeps[l].1, &mut buf.ws[l])
            .map_err(|_| diverged(&counter))?;
    }

    fine.rhs_into(&buf.u[0], &mut buf.tmp[0], &mut buf.ws[0]);
    counter.evals[0] += 1;
    let residual_after = rms(&buf.tmp[0]);
    if !residual_after.is_finite() {
        return Err(diverged(&counter));
    }
    field.values_mut().copy_from_slice(&buf.u[0]);

    Ok(CycleStats {
        residual_before,
        residual_after,
        wall_time: start.elapsed().as_secs_f64().max(1e-9),
        rhs_evals: counter.evals[0],
        work_units: counter.work(),
    })
}

/// Pure V-cycle: returns the updated field and cycle statistics.
pub fn v_cycle(
    field: &SolutionField,
    h: &MultigridHierarchy,
    params: &VCycleParams,
) -> Result<(SolutionField, CycleStats), MgError> {
    params.validate(h.order(), usize::MAX)?;
    let mut out = field.clone();
    let mut buf = CycleBuffers::new(h);
    let stats = v_cycle_in_place(&mut out, h, params, &mut buf, None)?;
    Ok((out, stats))
}

/// Supplies the parameters of each V-cycle.
pub trait ParamsProvider {
    fn params(&mut self, cycle: usize, last: Option<&CycleStats>) -> VCycleParams;
}

/// Fixed parameters for every cycle.
#[derive(Debug, Clone)]
pub struct FixedParams(pub VCycleParams);

impl ParamsProvider for FixedParams {
    fn params(&mut self, _cycle: usize, _last: Option<&CycleStats>) -> VCycleParams {
        self.0.clone()
    }
}

impl<F: FnMut(usize, Option<&CycleStats>) -> VCycleParams> ParamsProvider for F {
    fn params(&mut self, cycle: usize, last: Option<&CycleStats>) -> VCycleParams {
        self(cycle, last)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    Diverged,
    MaxCyclesExceeded,
}

#[derive(Debug, Clone)]
pub struct SteadyOutcome {
    pub status: SolveStatus,
    /// Final field; rolled back to the last finite state on divergence.
    pub field: SolutionField,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub history: Vec<CycleStats>,
    /// Work spent in a diverging cycle, which is not part of `history`.
    pub lost_rhs_evals: u64,
    pub lost_work_units: f64,
}

impl SteadyOutcome {
    pub fn cycles(&self) -> usize {
        self.history.len()
    }

    pub fn rhs_evals(&self) -> u64 {
        self.history.iter().map(|s| s.rhs_evals).sum::<u64>() + self.lost_rhs_evals
    }

    pub fn work_units(&self) -> f64 {
        self.history.iter().map(|s| s.work_units).sum::<f64>() + self.lost_work_units
    }

    pub fn wall_time(&self) -> f64 {
        self.history.iter().map(|s| s.wall_time).sum()
    }

    pub fn into_result(self) -> Result<Self, MgError> {
        match self.status {
            SolveStatus::Converged => Ok(self),
            SolveStatus::Diverged => Err(MgError::Diverged {
                rhs_evals: self.rhs_evals(),
                work_units: self.work_units(),
            }),
            SolveStatus::MaxCyclesExceeded => Err(MgError::MaxCyclesExceeded {
                cycles: self.cycles(),
                residual: self.final_residual,
            }),
        }
    }
}

/// Repeats V-cycles until the RMS residual reaches `tol`, the field
/// diverges, or `max_cycles` cycles have run.
pub fn solve_to_steady(
    field: &SolutionField,
    h: &MultigridHierarchy,
    provider: &mut dyn ParamsProvider,
    tol: f64,
    max_cycles: usize,
) -> Result<SteadyOutcome, MgError> {
    if !(tol > 0.0) {
        return Err(MgError::InvalidParams(format!("tolerance {tol} must be positive")));
    }
    let mut u = field.clone();
    let mut buf = CycleBuffers::new(h);
    let initial_residual = h.finest().residual_norm(&u);
    let mut residual = initial_residual;
    let mut history = Vec::new();
    let outcome = |status, u, residual, history, lost: (u64, f64)| SteadyOutcome {
        status,
        field: u,
        initial_residual,
        final_residual: residual,
        history,
        lost_rhs_evals: lost.0,
        lost_work_units: lost.1,
    };
    if !residual.is_finite() {
        return Ok(outcome(SolveStatus::Diverged, u, residual, history, (1, 1.0)));
    }
    while residual > tol {
        if history.len() >= max_cycles {
            return Ok(outcome(SolveStatus::MaxCyclesExceeded, u, residual, history, (0, 0.0)));
        }
        let params = provider.params(history.len(), history.last());
        params.validate(h.order(), usize::MAX)?;
        match v_cycle_in_place(&mut u, h, &params, &mut buf, Some(residual)) {
            Ok(stats) => {
                residual = stats.residual_after;
                history.push(stats);
            }
            Err(MgError::Diverged { rhs_evals, work_units }) => {
                return Ok(outcome(SolveStatus::Diverged, u, residual, history, (rhs_evals, work_units)));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(outcome(SolveStatus::Converged, u, residual, history, (0, 0.0)))
}

/// Result of plain RK4 pseudo-time marching on a single level.
#[derive(Debug, Clone)]
pub struct SingleGridOutcome {
    pub status: SolveStatus,
    pub field: SolutionField,
    pub steps: usize,
    pub rhs_evals: u64,
    pub final_residual: f64,
}

/// RK4 pseudo-time stepping on one discretization until the residual reaches
/// `tol`. Evaluations are counted as four per step plus the initial one: the
/// residual check at each state is the next step's first stage.
pub fn solve_single_grid(
    disc: &Discretization,
    field: &SolutionField,
    cfl: f64,
    tol: f64,
    max_steps: usize,
) -> SingleGridOutcome {
    let mut u = field.clone();
    let mut ws = disc.workspace();
    let mut res = vec![0.0; disc.n_dofs()];
    disc.rhs_into(u.values(), &mut res, &mut ws);
    let mut rhs_evals = 1u64;
    let mut residual = rms(&res);
    let mut steps = 0;
    let burgers = disc.eq.kind == EquationKind::Burgers;
    let status = loop {
        if !residual.is_finite() {
            break SolveStatus::Diverged;
        }
        if residual <= tol {
            break SolveStatus::Converged;
        }
        if steps >= max_steps {
            break SolveStatus::MaxCyclesExceeded;
        }
        let umax = if burgers { u.max_abs() } else { 1.0 };
        let dt = disc.stable_dt(cfl, umax);
        disc.rk4_in_place(u.values_mut(), None, dt, &mut ws);
        steps += 1;
        // The next step's first stage is the residual at the new state.
        disc.rhs_into(u.values(), &mut res, &mut ws);
        residual = rms(&res);
        rhs_evals += 4;
    };
    SingleGridOutcome { status, field: u, steps, rhs_evals, final_residual: residual }
}
