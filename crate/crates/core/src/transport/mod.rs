//! Couplings, exact 1-D transport and entropic transport under an
//! information budget.

mod constrained;
mod coupling;
mod exact;
mod sinkhorn;

pub use constrained::{sinkhorn_constrained, ConstrainedSolver};
pub use coupling::{Coupling, Plan};
pub use exact::{monotone_coupling, w2_exact_1d};
pub use sinkhorn::{sinkhorn_solve, sinkhorn_with, Duals, GibbsPlan, SinkhornOptions, SinkhornSolution};

/// Smallest `E[(X - Y)^2]` over jointly Gaussian couplings of `N(., var_x)`
/// and `N(., var_y)` whose mutual information is at most `r`.
pub fn gaussian_sinkhorn_oracle(var_x: f64, var_y: f64, mean_gap: f64, r: f64) -> f64 {
    let rho = (-(-2.0 * r).exp_m1()).max(0.0).sqrt();
    mean_gap * mean_gap + var_x + var_y - 2.0 * (var_x * var_y).sqrt() * rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn oracle_endpoints() {
        assert_relative_eq!(gaussian_sinkhorn_oracle(1.0, 1.0, 0.0, 2f64.ln()), 2.0 - 3f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(gaussian_sinkhorn_oracle(2.0, 3.0, 0.5, 0.0), 5.25, epsilon = 1e-12);
        let w2 = 0.5f64.powi(2) + (2f64.sqrt() - 3f64.sqrt()).powi(2);
        assert_relative_eq!(gaussian_sinkhorn_oracle(2.0, 3.0, 0.5, 50.0), w2, epsilon = 1e-12);
    }

    #[test]
    fn oracle_matches_brute_force_over_correlations() {
        // Minimize 2 - 2 rho subject to -ln(1 - rho^2) / 2 <= R on a fine rho grid.
        let r = 0.7;
        let best = (0..=1_000_000)
            .map(|k| k as f64 / 1e6)
            .filter(|rho| -0.5 * (1.0 - rho * rho).ln() <= r)
            .map(|rho| 2.0 - 2.0 * rho)
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(gaussian_sinkhorn_oracle(1.0, 1.0, 0.0, r), best, epsilon = 1e-5);
    }
}
