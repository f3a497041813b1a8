//! Restriction and prolongation between neighbouring multigrid levels.
//!
//! Restriction is the element-local L2 projection; prolongation evaluates the
//! coarse polynomial at the fine solution points. Both are exact under Gauss
//! quadrature, so restriction after prolongation is the identity.

use crate::fr::basis::{lagrange_row, Basis};
use crate::fr::{FrError, Mesh1D, SolutionField};

/// Small dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense {
    fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, yr) in y.iter_mut().enumerate().take(self.rows) {
            *yr = self.data[r * self.cols..(r + 1) * self.cols]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
        }
    }
}

/// Polynomial-order transfer between degree `fine_order` and `fine_order - 1`
/// on the same mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct PTransfer {
    fine_points: usize,
    coarse_points: usize,
    restrict: Dense,
    prolong: Dense,
}

impl PTransfer {
    pub fn new(fine_order: usize) -> Self {
        assert!(fine_order >= 1, "cannot coarsen below order zero");
        let fine = Basis::new(fine_order);
        let coarse = Basis::new(fine_order - 1);
        let (nf, nc) = (fine.n_points(), coarse.n_points());

        let mut restrict = Dense::new(nc, nf);
        for (n, &r) in fine.nodes.iter().enumerate() {
            let l = lagrange_row(&coarse.nodes, r);
            for i in 0..nc {
                restrict.set(i, n, fine.weights[n] * l[i] / coarse.weights[i]);
            }
        }
        let mut prolong = Dense::new(nf, nc);
        for (m, &r) in fine.nodes.iter().enumerate() {
            for (i, v) in lagrange_row(&coarse.nodes, r).into_iter().enumerate() {
                prolong.set(m, i, v);
            }
        }
        Self { fine_points: nf, coarse_points: nc, restrict, prolong }
    }

    pub fn restrict_into(&self, fine: &[f64], coarse: &mut [f64]) {
        for (f, c) in fine.chunks_exact(self.fine_points).zip(coarse.chunks_exact_mut(self.coarse_points)) {
            self.restrict.apply_into(f, c);
        }
    }

    pub fn prolong_into(&self, coarse: &[f64], fine: &mut [f64]) {
        for (c, f) in coarse.chunks_exact(self.coarse_points).zip(fine.chunks_exact_mut(self.fine_points)) {
            self.prolong.apply_into(c, f);
        }
    }

    pub fn restrict(&self, field: &SolutionField) -> SolutionField {
        let mut out = SolutionField::zeros(field.n_elements(), self.coarse_points);
        self.restrict_into(field.values(), out.values_mut());
        out
    }

    pub fn prolong(&self, field: &SolutionField) -> SolutionField {
        let mut out = SolutionField::zeros(field.n_elements(), self.fine_points);
        self.prolong_into(field.values(), out.values_mut());
        out
    }
}

/// Element-merging transfer at fixed degree. Children of a parent need not be
/// equal in size, so each element pair carries its own operators.
#[derive(Debug, Clone, PartialEq)]
pub struct HTransfer {
    n_points: usize,
    /// Per parent: `n_points x 2 n_points`, acting on the two children stacked.
    restrict: Vec<Dense>,
    /// Per parent: `2 n_points x n_points`.
    prolong: Vec<Dense>,
}

impl HTransfer {
    pub fn new(fine_mesh: &Mesh1D, order: usize) -> Result<Self, FrError> {
        let coarse_mesh = fine_mesh.coarsened()?;
        let basis = Basis::new(order);
        let np = basis.n_points();
        let mut restrict = Vec::with_capacity(coarse_mesh.n_elements());
        let mut prolong = Vec::with_capacity(coarse_mesh.n_elements());
        for k in 0..coarse_mesh.n_elements() {
            let v = fine_mesh.vertices();
            let (x0, x1, x2) = (v[2 * k], v[2 * k + 1], v[2 * k + 2]);
            let parent_jac = 0.5 * (x2 - x0);
            // Reference coordinate of the shared vertex inside the parent.
            let mid = 2.0 * (x1 - x0) / (x2 - x0) - 1.0;
            let children = [(-1.0, mid, 0.5 * (x1 - x0)), (mid, 1.0, 0.5 * (x2 - x1))];

            let mut r_op = Dense::new(np, 2 * np);
            let mut p_op = Dense::new(2 * np, np);
            for (c, &(lo, hi, child_jac)) in children.iter().enumerate() {
                for (n, &r) in basis.nodes.iter().enumerate() {
                    let rp = 0.5 * (1.0 - r) * lo + 0.5 * (1.0 + r) * hi;
                    let l = lagrange_row(&basis.nodes, rp);
                    for i in 0..np {
                        let w = child_jac * basis.weights[n] * l[i] / (parent_jac * basis.weights[i]);
                        r_op.set(i, c * np + n, w);
                        p_op.set(c * np + n, i, l[i]);
                    }
                }
            }
            restrict.push(r_op);
            prolong.push(p_op);
        }
        Ok(Self { n_points: np, restrict, prolong })
    }

    pub fn restrict_into(&self, fine: &[f64], coarse: &mut [f64]) {
        let np = self.n_points;
        for (k, op) in self.restrict.iter().enumerate() {
            op.apply_into(&fine[2 * k * np..(2 * k + 2) * np], &mut coarse[k * np..(k + 1) * np]);
        }
    }

    pub fn prolong_into(&self, coarse: &[f64], fine: &mut [f64]) {
        let np = self.n_points;
        for (k, op) in self.prolong.iter().enumerate() {
            op.apply_into(&coarse[k * np..(k + 1) * np], &mut fine[2 * k * np..(2 * k + 2) * np]);
        }
    }

    pub fn restrict(&self, field: &SolutionField) -> SolutionField {
        let mut out = SolutionField::zeros(field.n_elements() / 2, self.n_points);
        self.restrict_into(field.values(), out.values_mut());
        out
    }

    pub fn prolong(&self, field: &SolutionField) -> SolutionField {
        let mut out = SolutionField::zeros(field.n_elements() * 2, self.n_points);
        self.prolong_into(field.values(), out.values_mut());
        out
    }
}

/// Transfer between level `i` and level `i + 1` of a hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub enum Transfer {
    P(PTransfer),
    H(HTransfer),
}

impl Transfer {
    pub fn restrict_into(&self, fine: &[f64], coarse: &mut [f64]) {
        match self {
            Self::P(t) => t.restrict_into(fine, coarse),
            Self::H(t) => t.restrict_into(fine, coarse),
        }
    }

    pub fn prolong_into(&self, coarse: &[f64], fine: &mut [f64]) {
        match self {
            Self::P(t) => t.prolong_into(coarse, fine),
            Self::H(t) => t.prolong_into(coarse, fine),
        }
    }
}

/// L2 projection from degree `P` to `P - 1`.
pub fn restrict_p(field: &SolutionField) -> SolutionField {
    PTransfer::new(field.n_points() - 1).restrict(field)
}

/// Exact evaluation of a degree-`P` field at the degree-`P + 1` nodes.
pub fn prolong_p(field: &SolutionField) -> SolutionField {
    PTransfer::new(field.n_points()).prolong(field)
}

/// L2 projection onto the mesh with element pairs of `fine_mesh` merged.
pub fn restrict_h(field: &SolutionField, fine_mesh: &Mesh1D) -> Result<SolutionField, FrError> {
    Ok(HTransfer::new(fine_mesh, field.n_points() - 1)?.restrict(field))
}

/// Evaluation of a field on the merged mesh at the nodes of `fine_mesh`.
pub fn prolong_h(field: &SolutionField, fine_mesh: &Mesh1D) -> Result<SolutionField, FrError> {
    Ok(HTransfer::new(fine_mesh, field.n_points() - 1)?.prolong(field))
}
