use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationKind {
    LinearAdvectionDiffusion,
    Burgers,
}

impl EquationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LinearAdvectionDiffusion => "linear",
            Self::Burgers => "burgers",
        }
    }
}

impl std::str::FromStr for EquationKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" | "linear_advection_diffusion" | "advection-diffusion" => {
                Ok(Self::LinearAdvectionDiffusion)
            }
            "burgers" => Ok(Self::Burgers),
            other => Err(format!("unknown equation kind `{other}`")),
        }
    }
}

/// Model equation `u_t + f(u)_x = nu u_xx + s(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquationSpec {
    pub kind: EquationKind,
    /// Advection speed; ignored for Burgers.
    pub a: f64,
    pub nu: f64,
}

impl EquationSpec {
    pub fn linear(a: f64, nu: f64) -> Self {
        Self { kind: EquationKind::LinearAdvectionDiffusion, a, nu }
    }

    pub fn burgers(nu: f64) -> Self {
        Self { kind: EquationKind::Burgers, a: 0.0, nu }
    }

    #[inline]
    pub fn flux(&self, u: f64) -> f64 {
        match self.kind {
            EquationKind::LinearAdvectionDiffusion => self.a * u,
            EquationKind::Burgers => 0.5 * u * u,
        }
    }

    #[inline]
    pub fn has_source(&self) -> bool {
        self.kind == EquationKind::Burgers
    }

    /// Burgers forcing term, used verbatim.
    pub fn source(&self, x: f64) -> f64 {
        match self.kind {
            EquationKind::LinearAdvectionDiffusion => 0.0,
            EquationKind::Burgers => {
                let (s, c) = (2.0 * PI * x).sin_cos();
                2.0 * PI * (c * c - s * s) + self.nu * 2.0 * PI * (s + c)
            }
        }
    }

    /// Coefficients exposed to the agent: `(a, nu)` for the linear
    /// equation, `(nu)` for Burgers.
    pub fn coefficients(&self) -> Vec<f64> {
        match self.kind {
            EquationKind::LinearAdvectionDiffusion => vec![self.a, self.nu],
            EquationKind::Burgers => vec![self.nu],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.nu >= 0.0 && self.nu.is_finite() && self.a.is_finite()
    }

    /// Dirichlet data used throughout: the steady profile's end values for
    /// the linear equation, `sin 2 pi x + cos 2 pi x` at the ends for Burgers.
    pub fn default_bc(&self) -> BoundaryCondition {
        match self.kind {
            EquationKind::LinearAdvectionDiffusion => BoundaryCondition { left: 0.0, right: 1.0 },
            EquationKind::Burgers => BoundaryCondition { left: 1.0, right: 1.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub left: f64,
    pub right: f64,
}

/// Multi-frequency sine initial condition.
pub fn initial_condition(x: f64) -> f64 {
    0.25 * [2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0]
        .iter()
        .map(|k| (k * PI * x).sin())
        .sum::<f64>()
}

/// Analytic steady solution of `a u_x = nu u_xx` with `u(0) = 0`, `u(1) = 1`.
pub fn steady_profile(a: f64, nu: f64, x: f64) -> f64 {
    if nu == 0.0 || a == 0.0 {
        return x;
    }
    let pe = a / nu;
    if pe > 0.0 {
        // Written relative to the right boundary so large Peclet numbers
        // do not overflow.
        let num = (pe * (x - 1.0)).exp() - (-pe).exp();
        num / (-(-pe).exp_m1())
    } else {
        (pe * x).exp_m1() / pe.exp_m1()
    }
}
