use std::fmt;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridDensity;
use crate::numeric::{bisect, integrate};

/// Catalogue of strongly convex potentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    /// `V(x) = lambda x^2 / 2 + k`, the centered Gaussian with variance `1/lambda`.
    Quadratic { lambda: f64 },
    /// `V(x) = (x/5)^2/2 + |x/10| + exp(-|x/10|) + k`, with convexity constant 1/25.
    QuadraticSoftAbs,
}

/// A potential `V` with `exp(-V)` a probability density and `V'' >= lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    k: f64,
}

const SOFT_ABS_LAMBDA: f64 = 1.0 / 25.0;

impl Potential {
    pub fn quadratic(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidSpec(format!("quadratic potential needs lambda > 0, got {lambda}")));
        }
        let k = 0.5 * (2.0 * std::f64::consts::PI / lambda).ln();
        Ok(Self { kind: PotentialKind::Quadratic { lambda }, k })
    }

    /// The soft-absolute-value potential; its normalizer is found by quadrature.
    pub fn quadratic_soft_abs() -> Result<Self> {
        let mut pot = Self { kind: PotentialKind::QuadraticSoftAbs, k: 0.0 };
        pot.k = pot.log_partition_unnormalized()?;
        Ok(pot)
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    /// The additive constant `k` making `exp(-V)` integrate to one.
    pub fn normalizer(&self) -> f64 {
        self.k
    }

    /// Strong-convexity constant.
    pub fn lambda(&self) -> f64 {
        match self.kind {
            PotentialKind::Quadratic { lambda } => lambda,
            PotentialKind::QuadraticSoftAbs => SOFT_ABS_LAMBDA,
        }
    }

    /// Minimizer of `V`.
    pub fn mode(&self) -> f64 {
        0.0
    }

    fn shape(&self, x: f64) -> f64 {
        match self.kind {
            PotentialKind::Quadratic { lambda } => 0.5 * lambda * x * x,
            PotentialKind::QuadraticSoftAbs => {
                let a = (x / 10.0).abs();
                0.5 * (x / 5.0).powi(2) + a + (-a).exp()
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.shape(x) + self.k
    }

    pub fn grad(&self, x: f64) -> f64 {
        match self.kind {
            PotentialKind::Quadratic { lambda } => lambda * x,
            PotentialKind::QuadraticSoftAbs => {
                x / 25.0 + x.signum() * (-(-(x.abs() / 10.0)).exp_m1()) / 10.0
            }
        }
    }

    pub fn hess(&self, x: f64) -> f64 {
        match self.kind {
            PotentialKind::Quadratic { lambda } => lambda,
            PotentialKind::QuadraticSoftAbs => 1.0 / 25.0 + (-(x.abs() / 10.0)).exp() / 100.0,
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        (-self.eval(x)).exp()
    }

    /// Half-width beyond which `exp(-V)` is below `exp(-1800)` of its peak.
    fn span(&self) -> f64 {
        60.0 / self.lambda().sqrt()
    }

    fn log_partition_unnormalized(&self) -> Result<f64> {
        let m = self.mode();
        let s = self.span();
        let v0 = self.shape(m);
        let f = |x: f64| (-(self.shape(x) - v0)).exp();
        let left = integrate(f, m - s, m, 1e-300, 1e-14)?;
        let right = integrate(f, m, m + s, 1e-300, 1e-14)?;
        let z = left + right;
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::NonNormalizable(format!("partition integral {z}")));
        }
        Ok(z.ln() - v0)
    }

    /// `ln(int exp(-V))`, zero up to quadrature error once normalized.
    pub fn log_mass(&self) -> Result<f64> {
        Ok(self.log_partition_unnormalized()? - self.k)
    }

    /// `P(X <= x)` for `X ~ exp(-V)`, by quadrature toward the nearer tail.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let m = self.mode();
        let s = self.span();
        let f = |z: f64| self.density(z);
        if x <= m {
            if x <= m - s {
                return Ok(0.0);
            }
            integrate(f, m - s, x, 1e-300, 1e-13)
        } else {
            if x >= m + s {
                return Ok(1.0);
            }
            Ok(1.0 - integrate(f, x, m + s, 1e-300, 1e-13)?)
        }
    }

    /// `P(X > x)`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> Result<f64> {
        let m = self.mode();
        if x < m {
            return Ok(1.0 - self.cdf(x)?);
        }
        let s = self.span();
        if x >= m + s {
            return Ok(0.0);
        }
        integrate(|z| self.density(z), x, m + s, 1e-300, 1e-13)
    }

    /// Points `(lo, hi)` with lower and upper tail mass equal to `tail`.
    pub fn tail_points(&self, tail: f64) -> Result<(f64, f64)> {
        let m = self.mode();
        let s = self.span();
        let tol = 1e-12 * s;
        let lo = bisect(|x| self.cdf(x).unwrap_or(f64::NAN) - tail, m - s, m, tol, 200)?;
        let hi = bisect(|x| self.sf(x).unwrap_or(f64::NAN) - tail, m, m + s, tol, 200)?;
        Ok((lo, hi))
    }

    /// Analytic `ln E[exp(i w X)]` when the law is Gaussian.
    pub fn log_cf(&self, w: f64) -> Option<Complex64> {
        match self.kind {
            PotentialKind::Quadratic { lambda } => Some(Complex64::new(-0.5 * w * w / lambda, 0.0)),
            PotentialKind::QuadraticSoftAbs => None,
        }
    }

    /// `E[V(X)] = h(X)` computed by quadrature against `exp(-V)`.
    pub fn entropy(&self) -> Result<f64> {
        if let PotentialKind::Quadratic { lambda } = self.kind {
            return Ok(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E / lambda).ln());
        }
        let m = self.mode();
        let s = self.span();
        let f = |x: f64| {
            let v = self.eval(x);
            v * (-v).exp()
        };
        Ok(integrate(f, m - s, m, 1e-300, 1e-13)? + integrate(f, m, m + s, 1e-300, 1e-13)?)
    }

    /// Mean and variance, by quadrature.
    pub fn moments(&self) -> Result<(f64, f64)> {
        let m = self.mode();
        let s = self.span();
        let mean = integrate(|x| x * self.density(x), m - s, m, 1e-300, 1e-13)?
            + integrate(|x| x * self.density(x), m, m + s, 1e-300, 1e-13)?;
        let var = integrate(|x| (x - mean).powi(2) * self.density(x), m - s, m, 1e-300, 1e-13)?
            + integrate(|x| (x - mean).powi(2) * self.density(x), m, m + s, 1e-300, 1e-13)?;
        Ok((mean, var))
    }

    /// Smallest centered second difference of `V` over the given points.
    pub fn min_fd_curvature(&self, points: impl Iterator<Item = f64>, h: f64) -> f64 {
        points
            .map(|x| (self.eval(x + h) - 2.0 * self.eval(x) + self.eval(x - h)) / (h * h))
            .fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PotentialKind::Quadratic { lambda } => write!(f, "potential:quadratic,lambda={lambda}"),
            PotentialKind::QuadraticSoftAbs => write!(f, "potential:fig2"),
        }
    }
}

/// `sum V(x_i) p_i dx` over the support of `d`.
pub fn expected_potential(pot: &Potential, d: &GridDensity) -> Result<f64> {
    let mut acc = 0.0;
    for (i, &p) in d.values().iter().enumerate() {
        if p > 0.0 {
            let v = pot.eval(d.point(i));
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("V({}) = {v}", d.point(i))));
            }
            acc += v * p;
        }
    }
    Ok(acc * d.dx())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn quadratic_normalizer_matches_quadrature() {
        for lambda in [0.04, 1.0, 7.5] {
            let pot = Potential::quadratic(lambda).unwrap();
            assert!(pot.log_mass().unwrap().abs() < 1e-10);
            assert_relative_eq!(pot.normalizer(), 0.5 * (2.0 * PI / lambda).ln(), epsilon = 1e-15);
        }
        assert!(Potential::quadratic(0.0).is_err());
    }

    #[test]
    fn soft_abs_is_normalized() {
        let pot = Potential::quadratic_soft_abs().unwrap();
        assert!(pot.log_mass().unwrap().abs() < 1e-8);
        assert_eq!(pot.lambda(), 1.0 / 25.0);
    }

    #[test]
    fn soft_abs_derivatives_match_differences() {
        let pot = Potential::quadratic_soft_abs().unwrap();
        let h = 1e-5;
        for x in [-30.0, -3.0, -0.2, 0.4, 2.0, 17.0] {
            let fd = (pot.eval(x + h) - pot.eval(x - h)) / (2.0 * h);
            assert_relative_eq!(pot.grad(x), fd, epsilon = 1e-8);
            let fd2 = (pot.grad(x + h) - pot.grad(x - h)) / (2.0 * h);
            assert_relative_eq!(pot.hess(x), fd2, epsilon = 1e-7);
        }
        assert_eq!(pot.grad(0.0), 0.0);
    }

    #[test]
    fn soft_abs_curvature_bounded_below() {
        let pot = Potential::quadratic_soft_abs().unwrap();
        let pts = (0..4001).map(|i| -40.0 + 0.02 * i as f64);
        assert!(pot.min_fd_curvature(pts, 1e-3) >= 1.0 / 25.0 - 1e-6);
    }

    #[test]
    fn quadratic_tails_match_normal_quantiles() {
        let pot = Potential::quadratic(1.0).unwrap();
        let (lo, hi) = pot.tail_points(1e-3).unwrap();
        // Phi^{-1}(1e-3)
        assert_relative_eq!(hi, 3.090_232_306_167_813_5, epsilon = 1e-8);
        assert_relative_eq!(lo, -hi, epsilon = 1e-8);
    }

    #[test]
    fn entropy_equals_expected_potential() {
        let pot = Potential::quadratic(4.0).unwrap();
        let e = pot.entropy().unwrap();
        assert_relative_eq!(e, 0.5 * (2.0 * PI * std::f64::consts::E / 4.0).ln(), epsilon = 1e-14);
        let soft = Potential::quadratic_soft_abs().unwrap();
        let (mean, var) = soft.moments().unwrap();
        assert!(mean.abs() < 1e-10);
        assert!(var > 0.0 && var < 25.0);
    }

    #[test]
    fn expected_potential_of_standard_normal() {
        let pot = Potential::quadratic(1.0).unwrap();
        let d = GridDensity::tabulate(-10.0, 20.0 / 4095.0, 4096, |x| (-0.5 * x * x).exp()).unwrap();
        assert_relative_eq!(expected_potential(&pot, &d).unwrap(), 0.5 + 0.5 * (2.0 * PI).ln(), epsilon = 1e-9);
        let spike = GridDensity::from_values(1.5, 1e-6, vec![1.0]).unwrap();
        assert_relative_eq!(expected_potential(&pot, &spike).unwrap(), pot.eval(1.5), epsilon = 1e-12);
    }
}
