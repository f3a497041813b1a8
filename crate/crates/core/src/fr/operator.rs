//! Flux-reconstruction semi-discrete operator `du/dt = R(u)` and the RK4
//! pseudo-time smoother built on it.

use serde::{Deserialize, Serialize};

use super::basis::{gauss_legendre, lagrange_row, Basis};
use super::equation::{BoundaryCondition, EquationKind, EquationSpec};
use super::flux::{numerical_flux_inviscid, numerical_flux_viscous};
use super::mesh::Mesh1D;
use super::FrError;

/// Nodal values, one row of `P + 1` entries per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionField {
    n_elements: usize,
    n_points: usize,
    values: Vec<f64>,
}

impl SolutionField {
    pub fn zeros(n_elements: usize, n_points: usize) -> Self {
        Self { n_elements, n_points, values: vec![0.0; n_elements * n_points] }
    }

    pub fn from_values(n_elements: usize, n_points: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_elements * n_points, "field shape mismatch");
        Self { n_elements, n_points, values }
    }

    #[inline]
    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_elements, self.n_points)
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn element(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_points..(j + 1) * self.n_points]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Root-mean-square of the nodal values.
    pub fn rms(&self) -> f64 {
        rms(&self.values)
    }
}

#[inline]
pub(crate) fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// `v[0] + sum_i w_i (v_i - v[0])`, which equals `w . v` whenever the weights
/// sum to one (traces) and `w . v + v[0]` when they sum to zero (derivative
/// rows). Constants then cancel exactly instead of up to rounding.
#[inline]
fn offset_dot(w: &[f64], v: &[f64]) -> f64 {
    let v0 = v[0];
    v0 + w.iter().zip(v).skip(1).map(|(a, b)| a * (b - v0)).sum::<f64>()
}

/// Scratch buffers reused across operator evaluations.
#[derive(Debug, Clone)]
pub struct Workspace {
    face_u: Vec<f64>,
    face_f: Vec<f64>,
    q: Vec<f64>,
    flux: Vec<f64>,
    stage: Vec<f64>,
    k: [Vec<f64>; 4],
}

impl Workspace {
    pub fn new(n_elements: usize, n_points: usize) -> Self {
        let n = n_elements * n_points;
        Self {
            face_u: vec![0.0; n_elements + 1],
            face_f: vec![0.0; n_elements + 1],
            q: vec![0.0; n],
            flux: vec![0.0; n],
            stage: vec![0.0; n],
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }
}

/// One `(mesh, basis)` discretization of a model equation.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh1D,
    pub basis: Basis,
    pub eq: EquationSpec,
    pub bc: BoundaryCondition,
    source: Vec<f64>,
    inv_jac: Vec<f64>,
    penalty: f64,
}

impl Discretization {
    pub fn new(mesh: Mesh1D, basis: Basis, eq: EquationSpec, bc: BoundaryCondition) -> Self {
        let source = if eq.has_source() {
            mesh.node_coordinates(&basis.nodes).into_iter().map(|x| eq.source(x)).collect()
        } else {
            Vec::new()
        };
        let inv_jac = mesh.jacobians().iter().map(|j| 1.0 / j).collect();
        let p1 = (basis.order + 1) as f64;
        let penalty = p1 * p1 / mesh.width(mesh.n_elements() - 1);
        Self { mesh, basis, eq, bc, source, inv_jac, penalty }
    }

    #[inline]
    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements()
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.basis.n_points()
    }

    #[inline]
    pub fn n_dofs(&self) -> usize {
        self.n_elements() * self.n_points()
    }

    pub fn zero_field(&self) -> SolutionField {
        SolutionField::zeros(self.n_elements(), self.n_points())
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.n_elements(), self.n_points())
    }

    pub fn node_coordinates(&self) -> Vec<f64> {
        self.mesh.node_coordinates(&self.basis.nodes)
    }

    /// Samples `f` at every solution point.
    pub fn project_nodal(&self, f: impl Fn(f64) -> f64) -> SolutionField {
        let vals = self.node_coordinates().into_iter().map(f).collect();
        SolutionField::from_values(self.n_elements(), self.n_points(), vals)
    }

    fn check_shape(&self, field: &SolutionField) -> Result<(), FrError> {
        if field.shape() != (self.n_elements(), self.n_points()) {
            return Err(FrError::ShapeMismatch {
                expected: (self.n_elements(), self.n_points()),
                found: field.shape(),
            });
        }
        Ok(())
    }

    /// Corrected flux divergence for nodal fluxes `flux` and common face
    /// fluxes `face`, accumulated as `out = scale * (-(1/J) d/dr (...))`.
    #[inline]
    fn corrected_derivative(&self, nodal: &[f64], face: &[f64], out: &mut [f64], negate: bool) {
        let b = &self.basis;
        let np = b.n_points();
        let sign = if negate { -1.0 } else { 1.0 };
        for j in 0..self.n_elements() {
            let f = &nodal[j * np..(j + 1) * np];
            let f_left = offset_dot(&b.interp_left, f);
            let f_right = offset_dot(&b.interp_right, f);
            let jump_l = face[j] - f_left;
            let jump_r = face[j + 1] - f_right;
            let scale = sign * self.inv_jac[j];
            let o = &mut out[j * np..(j + 1) * np];
            for m in 0..np {
                let row = &b.diff[m * np..(m + 1) * np];
                let df = offset_dot(row, f) - f[0];
                o[m] = scale * (df + jump_l * b.g_left_deriv[m] + jump_r * b.g_right_deriv[m]);
            }
        }
    }

    /// `out = R(u)` without validation. `u` and `out` are flat nodal arrays.
    pub fn rhs_into(&self, u: &[f64], out: &mut [f64], ws: &mut Workspace) {
        let b = &self.basis;
        let np = b.n_points();
        let ne = self.n_elements();
        let nu = self.eq.nu;

        // Traces at faces: face i sits between element i-1 and element i.
        let trace = |j: usize, right: bool| -> f64 {
            let row = if right { &b.interp_right } else { &b.interp_left };
            offset_dot(row, &u[j * np..(j + 1) * np])
        };
        let left_state = |i: usize| if i == 0 { self.bc.left } else { trace(i - 1, true) };
        let right_state = |i: usize| if i == ne { self.bc.right } else { trace(i, false) };

        let viscous = nu > 0.0;
        if viscous {
            for i in 0..=ne {
                let u_hat = if i == ne {
                    self.bc.right
                } else {
                    numerical_flux_viscous(left_state(i), right_state(i), 0.0, 0.0).0
                };
                ws.face_u[i] = u_hat;
            }
            self.corrected_derivative(u, &ws.face_u, &mut ws.q, false);
        }

        for i in 0..=ne {
            let (ul, ur) = (left_state(i), right_state(i));
            let mut f = numerical_flux_inviscid(ul, ur, &self.eq);
            if viscous {
                let q_right_trace = |j: usize, right: bool| -> f64 {
                    let row = if right { &b.interp_right } else { &b.interp_left };
                    offset_dot(row, &ws.q[j * np..(j + 1) * np])
                };
                let q_hat = if i == ne {
                    // Dirichlet end without an upwind-compatible u_hat: penalize.
                    q_right_trace(ne - 1, true) - self.penalty * (ul - self.bc.right)
                } else {
                    let ql = if i == 0 { 0.0 } else { q_right_trace(i - 1, true) };
                    numerical_flux_viscous(ul, ur, ql, q_right_trace(i, false)).1
                };
                f -= nu * q_hat;
            }
            ws.face_f[i] = f;
        }

        match self.eq.kind {
            EquationKind::LinearAdvectionDiffusion => {
                let a = self.eq.a;
                for (fl, v) in ws.flux.iter_mut().zip(u) {
                    *fl = a * v;
                }
            }
            EquationKind::Burgers => {
                for (fl, v) in ws.flux.iter_mut().zip(u) {
                    *fl = 0.5 * v * v;
                }
            }
        }
        if viscous {
            for (fl, q) in ws.flux.iter_mut().zip(&ws.q) {
                *fl -= nu * q;
            }
        }
        self.corrected_derivative(&ws.flux, &ws.face_f, out, true);
        if !self.source.is_empty() {
            for (o, s) in out.iter_mut().zip(&self.source) {
                *o += s;
            }
        }
    }

    /// Semi-discrete tendency `du/dt` at every node.
    pub fn compute_rhs(&self, field: &SolutionField) -> Result<SolutionField, FrError> {
        self.check_shape(field)?;
        if !field.is_finite() {
            return Err(FrError::NonFiniteInput);
        }
        let mut out = self.zero_field();
        let mut ws = self.workspace();
        self.rhs_into(field.values(), out.values_mut(), &mut ws);
        Ok(out)
    }

    /// RMS of the tendency; `+inf` for a non-finite field.
    pub fn residual_norm(&self, field: &SolutionField) -> f64 {
        match self.compute_rhs(field) {
            Ok(r) if r.is_finite() => r.rms(),
            _ => f64::INFINITY,
        }
    }

    /// L2 norm of `field - exact` over the domain, integrating the nodal
    /// polynomial with a Gauss rule three points richer than the basis.
    pub fn l2_error(&self, field: &SolutionField, exact: impl Fn(f64) -> f64) -> Result<f64, FrError> {
        self.check_shape(field)?;
        let (qr, qw) = gauss_legendre(self.n_points() + 3);
        let rows: Vec<Vec<f64>> = qr.iter().map(|&r| lagrange_row(&self.basis.nodes, r)).collect();
        let mut sum = 0.0;
        for j in 0..self.n_elements() {
            let u = field.element(j);
            let jac = self.mesh.jacobians()[j];
            for ((row, &r), &w) in rows.iter().zip(&qr).zip(&qw) {
                let uh: f64 = row.iter().zip(u).map(|(l, v)| l * v).sum();
                let e = uh - exact(self.mesh.map_ref_to_phys(j, r)?);
                sum += w * jac * e * e;
            }
        }
        Ok(sum.sqrt())
    }

    /// Explicit pseudo-time step from advective and diffusive bounds.
    pub fn stable_dt(&self, cfl: f64, u_max: f64) -> f64 {
        stable_dt(&self.mesh, &self.basis, &self.eq, cfl, u_max)
    }

    /// One classical RK4 step of `du/dt = R(u) + forcing`, in place.
    /// Returns the stage-one tendency (which includes the forcing) in `ws`.
    pub fn rk4_in_place(&self, u: &mut [f64], forcing: Option<&[f64]>, dt: f64, ws: &mut Workspace) {
        let n = u.len();
        let mut k = std::mem::take(&mut ws.k);
        let mut stage = std::mem::take(&mut ws.stage);
        let add_forcing = |k: &mut [f64]| {
            if let Some(s) = forcing {
                for (a, b) in k.iter_mut().zip(s) {
                    *a += b;
                }
            }
        };
        let coeffs = [0.5, 0.5, 1.0];
        self.rhs_into(u, &mut k[0], ws);
        add_forcing(&mut k[0]);
        for s in 0..3 {
            let c = coeffs[s] * dt;
            for i in 0..n {
                stage[i] = u[i] + c * k[s][i];
            }
            let (_, rest) = k.split_at_mut(s + 1);
            self.rhs_into(&stage, &mut rest[0], ws);
            add_forcing(&mut rest[0]);
        }
        let w = dt / 6.0;
        for i in 0..n {
            u[i] += w * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        ws.k = k;
        ws.stage = stage;
    }

    /// Tendency of stage one of the most recent `rk4_in_place` call.
    pub fn last_stage_tendency<'a>(&self, ws: &'a Workspace) -> &'a [f64] {
        &ws.k[0]
    }

    /// Pure RK4 step: the input field is left untouched.
    pub fn rk4_step(&self, field: &SolutionField, dt: f64) -> Result<SolutionField, FrError> {
        self.check_shape(field)?;
        if !field.is_finite() {
            return Err(FrError::NonFiniteInput);
        }
        let mut out = field.clone();
        let mut ws = self.workspace();
        self.rk4_in_place(out.values_mut(), None, dt, &mut ws);
        Ok(out)
    }
}

/// `dt = cfl * min_j min(dx_j / (|s| (2P+1)), dx_j^2 / (nu (P+1)^2 (P+2)^2))`,
/// where `s` is `a` for the linear equation and `max(|u|, 1)` for Burgers.
///
/// The LDG viscous spectrum grows like `(P+1)^4 / dx^2`; the diffusive
/// denominator keeps RK4 inside its real-axis stability interval.
pub fn stable_dt(mesh: &Mesh1D, basis: &Basis, eq: &EquationSpec, cfl: f64, u_max: f64) -> f64 {
    let speed = match eq.kind {
        EquationKind::LinearAdvectionDiffusion => eq.a.abs(),
        EquationKind::Burgers => u_max.abs().max(1.0),
    };
    let p = basis.order as f64;
    let k_adv = 2.0 * p + 1.0;
    let k_diff = (p + 1.0) * (p + 1.0) * (p + 2.0) * (p + 2.0);
    let dx = mesh.min_width();
    let advective = if speed > 0.0 { dx / (speed * k_adv) } else { f64::INFINITY };
    let diffusive = if eq.nu > 0.0 { dx * dx / (eq.nu * k_diff) } else { f64::INFINITY };
    cfl * advective.min(diffusive)
}
