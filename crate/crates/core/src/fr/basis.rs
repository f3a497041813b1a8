//! Nodal Lagrange basis on Gauss-Legendre points together with the Radau
//! correction-function derivatives used by the flux-reconstruction operator.

use serde::{Deserialize, Serialize};

/// Legendre polynomial `L_k(r)` and its derivative, by the three-term recurrence.
pub fn legendre(k: usize, r: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, r);
    let (mut d_prev, mut d) = (0.0, 1.0);
    for n in 1..k {
        let nf = n as f64;
        let p_next = ((2.0 * nf + 1.0) * r * p - nf * p_prev) / (nf + 1.0);
        // L'_{n+1} = L'_{n-1} + (2n+1) L_n holds on the closed interval.
        let d_next = d_prev + (2.0 * nf + 1.0) * p;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// Gauss-Legendre nodes and weights with `n` points, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, refined by Newton.
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Barycentric weights for Lagrange interpolation through `nodes`.
fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| xi - xj)
                .product();
            1.0 / prod
        })
        .collect()
}

/// Values of every Lagrange cardinal polynomial through `nodes` at `r`.
pub fn lagrange_row(nodes: &[f64], r: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| (r - xj) / (nodes[i] - xj))
                .product()
        })
        .collect()
}

/// Left correction function `g_L` (right-Radau polynomial of degree `p + 1`)
/// and its derivative at `r`.
pub fn radau_left(p: usize, r: f64) -> (f64, f64) {
    let (lp1, dlp1) = legendre(p + 1, r);
    let (lp, dlp) = legendre(p, r);
    let s = if (p + 1) % 2 == 0 { 0.5 } else { -0.5 };
    (s * (lp1 - lp), s * (dlp1 - dlp))
}

/// Right correction function `g_R(r) = g_L(-r)` and its derivative at `r`.
pub fn radau_right(p: usize, r: f64) -> (f64, f64) {
    let (g, dg) = radau_left(p, -r);
    (g, -dg)
}

/// Element-local nodal basis of degree `order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Row-major `(P+1) x (P+1)`; `diff[m * n_pts + n] = l_n'(r_m)`.
    pub diff: Vec<f64>,
    pub g_left_deriv: Vec<f64>,
    pub g_right_deriv: Vec<f64>,
    /// `l_n(-1)`.
    pub interp_left: Vec<f64>,
    /// `l_n(+1)`.
    pub interp_right: Vec<f64>,
}

impl Basis {
    pub fn new(order: usize) -> Self {
        let n_pts = order + 1;
        let (nodes, weights) = gauss_legendre(n_pts);
        let bary = barycentric_weights(&nodes);

        let mut diff = vec![0.0; n_pts * n_pts];
        for m in 0..n_pts {
            let mut diag = 0.0;
            for n in 0..n_pts {
                if n != m {
                    let d = (bary[n] / bary[m]) / (nodes[m] - nodes[n]);
                    diff[m * n_pts + n] = d;
                    diag -= d;
                }
            }
            diff[m * n_pts + m] = diag;
        }

        let g_left_deriv = nodes.iter().map(|&r| radau_left(order, r).1).collect();
        let g_right_deriv = nodes.iter().map(|&r| radau_right(order, r).1).collect();
        let interp_left = lagrange_row(&nodes, -1.0);
        let interp_right = lagrange_row(&nodes, 1.0);

        Self {
            order,
            nodes,
            weights,
            diff,
            g_left_deriv,
            g_right_deriv,
            interp_left,
            interp_right,
        }
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.order + 1
    }

    /// Evaluate the nodal polynomial with values `coeffs` at reference point `r`.
    pub fn evaluate(&self, coeffs: &[f64], r: f64) -> f64 {
        lagrange_row(&self.nodes, r)
            .iter()
            .zip(coeffs)
            .map(|(l, c)| l * c)
            .sum()
    }
}
