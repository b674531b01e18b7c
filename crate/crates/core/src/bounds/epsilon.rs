use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridDensity;
use crate::potential::Potential;

/// `T(x_i) = F_Y^{-1}(F_X(x_i))` at every point of `x`, with `F_X` taken at
/// cell centers. One merged pass over both grids.
pub fn quantile_map(x: &GridDensity, y: &GridDensity) -> Vec<f64> {
    let ycum = y.cumulative();
    let left = y.x0() - 0.5 * y.dx();
    let mut j = 0usize;
    let mut acc = 0.0;
    x.values()
        .iter()
        .map(|&p| {
            let w = p * x.dx();
            let u = (acc + 0.5 * w).min(1.0);
            acc += w;
            while j + 1 < ycum.len() && ycum[j] < u {
                j += 1;
            }
            let below = if j == 0 { 0.0 } else { ycum[j - 1] };
            let cell = y.values()[j] * y.dx();
            let frac = if cell > 0.0 { ((u - below) / cell).clamp(0.0, 1.0) } else { 0.5 };
            left + y.dx() * (j as f64 + frac)
        })
        .collect()
}

/// `-E[(V'(t X' + X2) - t V'(X')) T(X')]` with `X' ~ x`, `X2 ~ x2`
/// independent and `T` the monotone map from `x` to `y`. Direct double sum.
pub fn epsilon_term_1d(pot: &Potential, x: &GridDensity, y: &GridDensity, t: f64, x2: &GridDensity) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidArgument(format!("t must lie in (0, 1], got {t}")));
    }
    let map = quantile_map(x, y);
    let zs: Vec<(f64, f64)> = x2
        .values()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(k, p)| (x2.point(k), p * x2.dx()))
        .collect();
    let zmass: f64 = zs.iter().map(|z| z.1).sum();
    let rows: Vec<f64> = x
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            if p <= 0.0 {
                return 0.0;
            }
            let xi = x.point(i);
            let inner: f64 = zs.iter().map(|&(z, w)| w * pot.grad(t * xi + z)).sum::<f64>() / zmass;
            p * x.dx() * (inner - t * pot.grad(xi)) * map[i]
        })
        .collect();
    let eps = -rows.iter().sum::<f64>();
    if !eps.is_finite() {
        return Err(Error::QuadratureFailure("V' is not finite over the joint support".into()));
    }
    Ok(eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{discretize, DistSpec};
    use approx::assert_relative_eq;

    fn gauss(mean: f64, var: f64, n: usize) -> GridDensity {
        discretize(&DistSpec::gaussian(mean, var).unwrap(), n, 1e-10).unwrap()
    }

    #[test]
    fn quantile_map_between_gaussians_is_affine() {
        let x = gauss(0.0, 1.0, 4096);
        let y = gauss(1.0, 4.0, 4096);
        let map = quantile_map(&x, &y);
        for i in (1000..3000).step_by(250) {
            assert_relative_eq!(map[i], 1.0 + 2.0 * x.point(i), epsilon = 2e-3);
        }
    }

    #[test]
    fn vanishes_for_linear_gradient() {
        let pot = Potential::quadratic(1.0).unwrap();
        let x = gauss(0.0, 1.0, 4096);
        let y = gauss(0.3, 2.0, 4096);
        let x2 = gauss(0.0, 0.25, 2048);
        let eps = epsilon_term_1d(&pot, &x, &y, 0.8, &x2).unwrap();
        assert!(eps.abs() < 1e-4, "{eps}");
    }

    #[test]
    fn vanishes_for_point_mass_and_unit_weight() {
        let pot = Potential::quadratic_soft_abs().unwrap();
        let x = gauss(0.0, 9.0, 1024);
        let y = gauss(0.0, 1.0 / 25.0, 1024);
        let dirac = GridDensity::from_values(0.0, 0.1, vec![1.0]).unwrap();
        assert!(epsilon_term_1d(&pot, &x, &y, 1.0, &dirac).unwrap().abs() < 1e-6);
    }

    #[test]
    fn soft_abs_value_is_resolution_stable() {
        let pot = Potential::quadratic_soft_abs().unwrap();
        let spec = DistSpec::PotentialDefined(pot);
        let run = |n: usize| {
            let x = discretize(&spec, n, 1e-10).unwrap();
            let y = gauss(0.0, 1.0 / 25.0, n);
            let x2 = gauss(0.0, 4.0, n);
            epsilon_term_1d(&pot, &x, &y, 0.7, &x2).unwrap()
        };
        let (a, b) = (run(1024), run(2048));
        assert!(a.is_finite() && (a - b).abs() < 1e-3, "{a} vs {b}");
    }
}
