use super::equation::{EquationKind, EquationSpec};

/// Roe-type interface flux. Reduces to exact upwinding for linear advection.
#[inline]
pub fn numerical_flux_inviscid(u_left: f64, u_right: f64, eq: &EquationSpec) -> f64 {
    let speed = match eq.kind {
        EquationKind::LinearAdvectionDiffusion => eq.a,
        EquationKind::Burgers => 0.5 * (u_left + u_right),
    };
    0.5 * (eq.flux(u_left) + eq.flux(u_right)) - 0.5 * speed.abs() * (u_right - u_left)
}

/// Alternating LDG choice: solution from the left, gradient from the right.
/// Returns `(u_hat, q_hat)`; the viscous interface flux is `nu * q_hat`.
#[inline]
pub fn numerical_flux_viscous(u_left: f64, _u_right: f64, _q_left: f64, q_right: f64) -> (f64, f64) {
    (u_left, q_right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_values() {
        let lin = EquationSpec::linear(1.0, 0.0);
        assert_eq!(numerical_flux_inviscid(2.0, 5.0, &lin), 2.0);
        let b = EquationSpec::burgers(0.0);
        assert_eq!(numerical_flux_inviscid(3.0, 3.0, &b), 4.5);
        assert_eq!(numerical_flux_inviscid(1.0, 0.0, &b), 0.5);
        assert_eq!(numerical_flux_viscous(2.0, 2.0, 0.5, 0.5), (2.0, 0.5));
        assert_eq!(numerical_flux_viscous(1.0, 3.0, 0.0, 2.0), (1.0, 2.0));
    }

    /// Godunov flux for `u_t + (u^2/2)_x = eps u_xx` in the limit eps -> 0,
    /// evaluated for the shock case `uL > uR` where Roe and the vanishing
    /// viscosity solution coincide.
    #[test]
    fn burgers_shock_matches_vanishing_viscosity_limit() {
        let b = EquationSpec::burgers(0.0);
        let (ul, ur) = (1.0, 0.0);
        let shock_speed: f64 = 0.5 * (ul + ur);
        let godunov = if shock_speed > 0.0 { 0.5 * ul * ul } else { 0.5 * ur * ur };
        assert!((numerical_flux_inviscid(ul, ur, &b) - godunov).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn linear_flux_is_upwind(a in -3.0f64..3.0, ul in -10.0f64..10.0, ur in -10.0f64..10.0) {
            let eq = EquationSpec::linear(a, 0.0);
            let upwind = if a >= 0.0 { a * ul } else { a * ur };
            prop_assert!((numerical_flux_inviscid(ul, ur, &eq) - upwind).abs() <= 1e-12 * (1.0 + upwind.abs()));
        }

        #[test]
        fn burgers_flux_is_consistent(u in -10.0f64..10.0) {
            let eq = EquationSpec::burgers(0.1);
            prop_assert!((numerical_flux_inviscid(u, u, &eq) - 0.5 * u * u).abs() < 1e-12);
        }
    }
}
