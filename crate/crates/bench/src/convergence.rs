//! Spatial order of accuracy: steady solutions on refined uniform meshes
//! compared with the analytic advection-diffusion profile.

use hpmg_core::fr::steady::solve_steady;
use hpmg_core::fr::{steady_profile, Basis, Discretization, EquationSpec, Mesh1D};
use serde::Serialize;

use crate::BenchError;

/// Newton stopping tolerance on the tendency RMS.
const STEADY_TOL: f64 = 1e-10;
const STEADY_MAX_ITER: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub order: usize,
    pub n_elements: usize,
    pub l2_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub a: f64,
    pub nu: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `-log(error)` against `log(N)` per order.
    pub slopes: Vec<(usize, f64)>,
}

impl ConvergenceReport {
    pub fn slope(&self, order: usize) -> Option<f64> {
        self.slopes.iter().find(|(p, _)| *p == order).map(|&(_, s)| s)
    }
}

pub fn steady_error(order: usize, n_elements: usize, a: f64, nu: f64) -> Result<f64, BenchError> {
    let eq = EquationSpec::linear(a, nu);
    let disc = Discretization::new(Mesh1D::uniform(n_elements), Basis::new(order), eq, eq.default_bc());
    let exact = |x: f64| steady_profile(a, nu, x);
    let u = solve_steady(&disc, &disc.project_nodal(exact), STEADY_TOL, STEADY_MAX_ITER)?;
    Ok(disc.l2_error(&u, exact)?)
}

/// Fits `log e = c - s log N` and returns `s`.
pub fn fitted_slope(sizes: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -sxy / sxx
}

pub fn convergence_study(orders: &[usize], sizes: &[usize], a: f64, nu: f64) -> Result<ConvergenceReport, BenchError> {
    if sizes.len() < 2 {
        return Err(BenchError::Config("a slope needs at least two mesh sizes".into()));
    }
    if !(nu > 0.0) {
        return Err(BenchError::Config("the analytic profile needs nu > 0".into()));
    }
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for &order in orders {
        let errors = sizes.iter().map(|&n| steady_error(order, n, a, nu)).collect::<Result<Vec<_>, _>>()?;
        slopes.push((order, fitted_slope(sizes, &errors)));
        rows.extend(sizes.iter().zip(&errors).map(|(&n, &e)| ConvergenceRow { order, n_elements: n, l2_error: e }));
    }
    Ok(ConvergenceReport { a, nu, rows, slopes })
}
