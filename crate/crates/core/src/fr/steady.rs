//! Direct steady-state solves of `R(u) = 0`, used as references for the
//! iterative solvers and for order-of-accuracy studies.

use nalgebra::{DMatrix, DVector};

use super::equation::EquationKind;
use super::operator::{Discretization, SolutionField};
use super::FrError;

/// Dense Jacobian of `R` at `u`. Exact for the linear equation (the operator
/// is affine), central differences otherwise.
pub fn jacobian(disc: &Discretization, u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut ws = disc.workspace();
    let mut jac = DMatrix::zeros(n, n);
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let mut probe = u.to_vec();
    let linear = disc.eq.kind == EquationKind::LinearAdvectionDiffusion;
    for c in 0..n {
        let h = if linear { 1.0 } else { 1e-6 * (1.0 + u[c].abs()) };
        probe[c] = u[c] + h;
        disc.rhs_into(&probe, &mut plus, &mut ws);
        probe[c] = u[c] - h;
        disc.rhs_into(&probe, &mut minus, &mut ws);
        probe[c] = u[c];
        for r in 0..n {
            jac[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    jac
}

/// Newton iteration on `R(u) = 0` starting from `initial`, until the RMS
/// residual drops below `tol`.
pub fn solve_steady(
    disc: &Discretization,
    initial: &SolutionField,
    tol: f64,
    max_iter: usize,
) -> Result<SolutionField, FrError> {
    let mut u = initial.clone();
    for _ in 0..max_iter {
        let r = disc.compute_rhs(&u)?;
        if r.rms() <= tol {
            return Ok(u);
        }
        let jac = jacobian(disc, u.values());
        let rhs = DVector::from_column_slice(r.values());
        let step = jac.lu().solve(&rhs).ok_or(FrError::SingularSystem)?;
        for (v, d) in u.values_mut().iter_mut().zip(step.iter()) {
            *v -= d;
        }
    }
    let residual = disc.compute_rhs(&u)?.rms();
    if residual <= tol {
        Ok(u)
    } else {
        Err(FrError::NotConverged { residual })
    }
}
