use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grid::GridDensity;
use crate::numeric::bisect;
use crate::potential::{Potential, PotentialKind};

const MIN_VAR: f64 = 1e-12;

/// Analytic description of a one-dimensional law.
#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    Gaussian { mean: f64, var: f64 },
    Cauchy { x0: f64, gamma: f64 },
    GaussianMixture { weights: Vec<f64>, means: Vec<f64>, vars: Vec<f64> },
    PotentialDefined(Potential),
}

fn std_normal() -> Normal {
    Normal::standard()
}

impl DistSpec {
    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        let s = DistSpec::Gaussian { mean, var };
        s.validate()?;
        Ok(s)
    }

    pub fn cauchy(x0: f64, gamma: f64) -> Result<Self> {
        let s = DistSpec::Cauchy { x0, gamma };
        s.validate()?;
        Ok(s)
    }

    pub fn mixture(weights: Vec<f64>, means: Vec<f64>, vars: Vec<f64>) -> Result<Self> {
        let s = DistSpec::GaussianMixture { weights, means, vars };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{what} must be finite, got {v}")))
            }
        };
        match self {
            DistSpec::Gaussian { mean, var } => {
                finite(*mean, "mean")?;
                finite(*var, "var")?;
                if *var < MIN_VAR {
                    return Err(Error::InvalidSpec(format!("gaussian var must be >= {MIN_VAR}, got {var}")));
                }
            }
            DistSpec::Cauchy { x0, gamma } => {
                finite(*x0, "x0")?;
                finite(*gamma, "gamma")?;
                if *gamma <= 0.0 {
                    return Err(Error::InvalidSpec(format!("cauchy gamma must be > 0, got {gamma}")));
                }
            }
            DistSpec::GaussianMixture { weights, means, vars } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != vars.len() {
                    return Err(Error::InvalidSpec(
                        "mixture needs equally many weights, means and vars".into(),
                    ));
                }
                for ((w, m), v) in weights.iter().zip(means).zip(vars) {
                    finite(*w, "weight")?;
                    finite(*m, "mean")?;
                    finite(*v, "var")?;
                    if *w < 0.0 {
                        return Err(Error::InvalidSpec(format!("negative mixture weight {w}")));
                    }
                    if *v < MIN_VAR {
                        return Err(Error::InvalidSpec(format!("mixture var must be >= {MIN_VAR}, got {v}")));
                    }
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidSpec(format!("mixture weights sum to {total}")));
                }
            }
            DistSpec::PotentialDefined(_) => {}
        }
        Ok(())
    }

    /// Location used to center the law: the mean, or the median for Cauchy.
    pub fn center(&self) -> Result<f64> {
        match self {
            DistSpec::Cauchy { x0, .. } => Ok(*x0),
            _ => self.mean().map(|m| m.expect("finite mean")),
        }
    }

    /// The same law translated by `-shift`.
    pub fn shifted(&self, shift: f64) -> Result<DistSpec> {
        Ok(match self {
            DistSpec::Gaussian { mean, var } => DistSpec::Gaussian { mean: mean - shift, var: *var },
            DistSpec::Cauchy { x0, gamma } => DistSpec::Cauchy { x0: x0 - shift, gamma: *gamma },
            DistSpec::GaussianMixture { weights, means, vars } => DistSpec::GaussianMixture {
                weights: weights.clone(),
                means: means.iter().map(|m| m - shift).collect(),
                vars: vars.clone(),
            },
            DistSpec::PotentialDefined(_) => {
                if shift == 0.0 {
                    self.clone()
                } else {
                    return Err(Error::UnsupportedSpec(format!("translating {self}")));
                }
            }
        })
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            DistSpec::Gaussian { mean, var } => gauss_pdf(x, *mean, *var),
            DistSpec::Cauchy { x0, gamma } => {
                let z = (x - x0) / gamma;
                1.0 / (std::f64::consts::PI * gamma * (1.0 + z * z))
            }
            DistSpec::GaussianMixture { weights, means, vars } => weights
                .iter()
                .zip(means)
                .zip(vars)
                .map(|((w, m), v)| w * gauss_pdf(x, *m, *v))
                .sum(),
            DistSpec::PotentialDefined(pot) => pot.density(x),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(match self {
            DistSpec::Gaussian { mean, var } => std_normal().cdf((x - mean) / var.sqrt()),
            DistSpec::Cauchy { x0, gamma } => 0.5 + ((x - x0) / gamma).atan() / std::f64::consts::PI,
            DistSpec::GaussianMixture { weights, means, vars } => weights
                .iter()
                .zip(means)
                .zip(vars)
                .map(|((w, m), v)| w * std_normal().cdf((x - m) / v.sqrt()))
                .sum(),
            DistSpec::PotentialDefined(pot) => pot.cdf(x)?,
        })
    }

    /// `P(X > x)` without cancellation in the upper tail.
    pub fn sf(&self, x: f64) -> Result<f64> {
        Ok(match self {
            DistSpec::Gaussian { mean, var } => std_normal().sf((x - mean) / var.sqrt()),
            DistSpec::Cauchy { x0, gamma } => 0.5 - ((x - x0) / gamma).atan() / std::f64::consts::PI,
            DistSpec::GaussianMixture { weights, means, vars } => weights
                .iter()
                .zip(means)
                .zip(vars)
                .map(|((w, m), v)| w * std_normal().sf((x - m) / v.sqrt()))
                .sum(),
            DistSpec::PotentialDefined(pot) => pot.sf(x)?,
        })
    }

    /// Points cutting off `tail` mass on each side.
    pub fn tail_points(&self, tail: f64) -> Result<(f64, f64)> {
        if !(tail > 0.0 && tail < 0.5) {
            return Err(Error::InvalidArgument(format!("tail mass must lie in (0, 0.5), got {tail}")));
        }
        match self {
            DistSpec::Gaussian { mean, var } => {
                let z = -std_normal().inverse_cdf(tail);
                Ok((mean - z * var.sqrt(), mean + z * var.sqrt()))
            }
            DistSpec::Cauchy { x0, gamma } => {
                let q = (std::f64::consts::PI * (0.5 - tail)).tan();
                Ok((x0 - gamma * q, x0 + gamma * q))
            }
            DistSpec::GaussianMixture { means, vars, .. } => {
                let z = -std_normal().inverse_cdf(tail);
                let lo_b = means.iter().zip(vars).map(|(m, v)| m - z * v.sqrt()).fold(f64::INFINITY, f64::min);
                let hi_b = means.iter().zip(vars).map(|(m, v)| m + z * v.sqrt()).fold(f64::NEG_INFINITY, f64::max);
                let tol = 1e-13 * (hi_b - lo_b);
                let lo = bisect(|x| self.cdf(x).unwrap_or(f64::NAN) - tail, lo_b, hi_b, tol, 300)?;
                let hi = bisect(|x| self.sf(x).unwrap_or(f64::NAN) - tail, lo_b, hi_b, tol, 300)?;
                Ok((lo, hi))
            }
            DistSpec::PotentialDefined(pot) => pot.tail_points(tail),
        }
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidArgument(format!("quantile level must lie in (0, 1), got {u}")));
        }
        if u <= 0.5 {
            Ok(self.tail_points(u)?.0)
        } else {
            Ok(self.tail_points(1.0 - u)?.1)
        }
    }

    /// Mean, or `None` when it does not exist.
    pub fn mean(&self) -> Result<Option<f64>> {
        Ok(match self {
            DistSpec::Gaussian { mean, .. } => Some(*mean),
            DistSpec::Cauchy { .. } => None,
            DistSpec::GaussianMixture { weights, means, .. } => {
                Some(weights.iter().zip(means).map(|(w, m)| w * m).sum())
            }
            DistSpec::PotentialDefined(pot) => Some(pot.moments()?.0),
        })
    }

    pub fn variance(&self) -> Result<Option<f64>> {
        Ok(match self {
            DistSpec::Gaussian { var, .. } => Some(*var),
            DistSpec::Cauchy { .. } => None,
            DistSpec::GaussianMixture { weights, means, vars } => {
                let mu: f64 = weights.iter().zip(means).map(|(w, m)| w * m).sum();
                Some(
                    weights
                        .iter()
                        .zip(means)
                        .zip(vars)
                        .map(|((w, m), v)| w * (v + (m - mu).powi(2)))
                        .sum(),
                )
            }
            DistSpec::PotentialDefined(pot) => Some(pot.moments()?.1),
        })
    }

    /// Analytic differential entropy where a closed form exists.
    pub fn entropy(&self) -> Option<f64> {
        use std::f64::consts::{E, PI};
        match self {
            DistSpec::Gaussian { var, .. } => Some(0.5 * (2.0 * PI * E * var).ln()),
            DistSpec::Cauchy { gamma, .. } => Some((4.0 * PI * gamma).ln()),
            DistSpec::PotentialDefined(p) if matches!(p.kind(), PotentialKind::Quadratic { .. }) => p.entropy().ok(),
            _ => None,
        }
    }

    /// `ln E[exp(i w X)]` when available in closed form.
    pub fn log_cf(&self, w: f64) -> Option<Complex64> {
        let i = Complex64::i();
        match self {
            DistSpec::Gaussian { mean, var } => Some(i * w * mean - 0.5 * var * w * w),
            DistSpec::Cauchy { x0, gamma } => Some(i * w * x0 - gamma * w.abs()),
            DistSpec::GaussianMixture { weights, means, vars } => {
                let terms: Vec<Complex64> = weights
                    .iter()
                    .zip(means)
                    .zip(vars)
                    .filter(|((wk, _), _)| **wk > 0.0)
                    .map(|((wk, m), v)| wk.ln() + i * w * m - 0.5 * v * w * w)
                    .collect();
                let top = terms.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
                let s: Complex64 = terms.iter().map(|z| (z - top).exp()).sum();
                Some(top + s.ln())
            }
            DistSpec::PotentialDefined(p) => p.log_cf(w),
        }
    }

    /// Smallest component variance of a mixture (the variance for a Gaussian).
    pub fn min_component_var(&self) -> Option<f64> {
        match self {
            DistSpec::Gaussian { var, .. } => Some(*var),
            DistSpec::GaussianMixture { weights, vars, .. } => weights
                .iter()
                .zip(vars)
                .filter(|(w, _)| **w > 0.0)
                .map(|(_, v)| *v)
                .reduce(f64::min),
            _ => None,
        }
    }

    /// Default `(points, tail mass)` used by the pipelines.
    ///
    /// Cauchy tails are heavy, so a finer and wider grid with a looser tail
    /// cut keeps the entropy bias near 3e-3.
    pub fn default_grid(&self) -> (usize, f64) {
        match self {
            DistSpec::Cauchy { .. } => (65536, 1e-4),
            _ => (4096, 1e-10),
        }
    }

    pub fn discretize_default(&self) -> Result<GridDensity> {
        let (n, tol) = self.default_grid();
        discretize(self, n, tol)
    }
}

fn gauss_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    (-0.5 * z * z / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Tabulates `spec` on `n_points` uniform points spanning its central `1 - 2 mass_tol` mass.
pub fn discretize(spec: &DistSpec, n_points: usize, mass_tol: f64) -> Result<GridDensity> {
    spec.validate()?;
    if n_points < 64 || !n_points.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("n_points must be a power of two >= 64, got {n_points}")));
    }
    if !(mass_tol > 0.0 && mass_tol < 1e-3) {
        return Err(Error::InvalidArgument(format!("mass_tol must lie in (0, 1e-3), got {mass_tol}")));
    }
    let (lo, hi) = spec.tail_points(mass_tol)?;
    discretize_on(spec, lo, (hi - lo) / (n_points - 1) as f64, n_points)
}

/// Tabulates `spec` on a caller-chosen grid.
pub fn discretize_on(spec: &DistSpec, x0: f64, dx: f64, n: usize) -> Result<GridDensity> {
    GridDensity::tabulate(x0, dx, n, |x| spec.density(x)).map_err(|e| match (e, spec) {
        (Error::NumericalFailure(m), DistSpec::PotentialDefined(_)) => Error::NonNormalizable(m),
        (e, _) => e,
    })
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        match self {
            DistSpec::Gaussian { mean, var } => write!(f, "gaussian:mean={mean},var={var}"),
            DistSpec::Cauchy { x0, gamma } => write!(f, "cauchy:x0={x0},gamma={gamma}"),
            DistSpec::GaussianMixture { weights, means, vars } => {
                write!(f, "mixture:w={},mean={},var={}", join(weights), join(means), join(vars))
            }
            DistSpec::PotentialDefined(p) => write!(f, "{p}"),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidSpec(format!("{key}: cannot parse '{v}' as a number")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(';').map(|s| parse_f64(key, s)).collect()
}

struct Params<'a> {
    kind: &'a str,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Params<'a> {
    fn take(&mut self, key: &str) -> Result<&'a str> {
        let pos = self
            .pairs
            .iter()
            .position(|(k, _)| *k == key)
            .ok_or_else(|| Error::InvalidSpec(format!("{}: missing parameter '{key}'", self.kind)))?;
        Ok(self.pairs.remove(pos).1)
    }

    fn finish(self) -> Result<()> {
        match self.pairs.first() {
            Some((k, _)) => Err(Error::InvalidSpec(format!("{}: unknown parameter '{k}'", self.kind))),
            None => Ok(()),
        }
    }
}

fn split_params<'a>(kind: &'a str, rest: &'a str) -> Result<Params<'a>> {
    let mut pairs = Vec::new();
    for item in rest.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidSpec(format!("{kind}: expected key=value, got '{item}'")))?;
        if pairs.iter().any(|(pk, _)| *pk == k.trim()) {
            return Err(Error::InvalidSpec(format!("{kind}: duplicate parameter '{}'", k.trim())));
        }
        pairs.push((k.trim(), v.trim()));
    }
    Ok(Params { kind, pairs })
}

impl FromStr for DistSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidSpec(format!("'{s}': expected <kind>:<params>")))?;
        let spec = match kind {
            "gaussian" => {
                let mut p = split_params(kind, rest)?;
                let spec = DistSpec::Gaussian {
                    mean: parse_f64("mean", p.take("mean")?)?,
                    var: parse_f64("var", p.take("var")?)?,
                };
                p.finish()?;
                spec
            }
            "cauchy" => {
                let mut p = split_params(kind, rest)?;
                let spec = DistSpec::Cauchy {
                    x0: parse_f64("x0", p.take("x0")?)?,
                    gamma: parse_f64("gamma", p.take("gamma")?)?,
                };
                p.finish()?;
                spec
            }
            "mixture" => {
                let mut p = split_params(kind, rest)?;
                let spec = DistSpec::GaussianMixture {
                    weights: parse_list("w", p.take("w")?)?,
                    means: parse_list("mean", p.take("mean")?)?,
                    vars: parse_list("var", p.take("var")?)?,
                };
                p.finish()?;
                spec
            }
            "potential" => {
                let (name, tail) = rest.split_once(',').unwrap_or((rest, ""));
                match name.trim() {
                    "fig2" => {
                        split_params("potential:fig2", tail)?.finish()?;
                        DistSpec::PotentialDefined(Potential::quadratic_soft_abs()?)
                    }
                    "quadratic" => {
                        let mut p = split_params("potential:quadratic", tail)?;
                        let lambda = parse_f64("lambda", p.take("lambda")?)?;
                        p.finish()?;
                        DistSpec::PotentialDefined(Potential::quadratic(lambda)?)
                    }
                    other => return Err(Error::InvalidSpec(format!("unknown potential '{other}'"))),
                }
            }
            other => return Err(Error::InvalidSpec(format!("unknown distribution kind '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl FromStr for Potential {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<DistSpec>()? {
            DistSpec::PotentialDefined(p) => Ok(p),
            other => Err(Error::InvalidSpec(format!("'{other}' is not a potential"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::scale_density;
    use approx::assert_relative_eq;

    #[test]
    fn parses_and_prints_catalogue() {
        for s in [
            "gaussian:mean=0,var=1",
            "gaussian:mean=-1.5,var=0.04",
            "cauchy:x0=0,gamma=1",
            "mixture:w=0.5;0.5,mean=-2;2,var=1;1",
            "potential:fig2",
            "potential:quadratic,lambda=0.25",
        ] {
            let spec: DistSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        for s in [
            "gaussian:mean=0",
            "gaussian:mean=0,var=0",
            "gaussian:mean=0,var=1,extra=2",
            "cauchy:x0=0,gamma=-1",
            "mixture:w=0.5;0.6,mean=0;1,var=1;1",
            "mixture:w=1,mean=0;1,var=1",
            "potential:cubic",
            "potential:quadratic,lambda=0",
            "laplace:b=1",
            "gaussian",
        ] {
            assert!(s.parse::<DistSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn gaussian_grid_moments() {
        let d = discretize(&DistSpec::gaussian(0.3, 2.0).unwrap(), 4096, 1e-10).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-10);
        assert!((d.mean() - 0.3).abs() < 1e-6);
        assert!((d.variance() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn mixture_grid_moments() {
        let spec: DistSpec = "mixture:w=0.3;0.7,mean=-2;1,var=0.5;2".parse().unwrap();
        let d = discretize(&spec, 4096, 1e-10).unwrap();
        assert!((d.mean() - spec.mean().unwrap().unwrap()).abs() < 1e-6);
        assert!((d.variance() - spec.variance().unwrap().unwrap()).abs() < 1e-6);
    }

    #[test]
    fn cauchy_support_from_quantiles() {
        let d = discretize(&DistSpec::cauchy(0.0, 1.0).unwrap(), 4096, 1e-6).unwrap();
        let q = (std::f64::consts::PI * (0.5 - 1e-6)).tan();
        assert_relative_eq!(d.x0(), -q, max_relative = 1e-9);
        assert_relative_eq!(d.x_last(), q, max_relative = 1e-9);
        assert!(q > 3.18e5 && q < 3.19e5);
    }

    #[test]
    fn quadratic_potential_matches_standard_normal() {
        let pot: DistSpec = "potential:quadratic,lambda=1".parse().unwrap();
        let g = DistSpec::gaussian(0.0, 1.0).unwrap();
        let d = discretize(&pot, 4096, 1e-10).unwrap();
        let (lo, hi) = g.tail_points(1e-10).unwrap();
        assert_relative_eq!(d.x0(), lo, epsilon = 1e-7);
        assert_relative_eq!(d.x_last(), hi, epsilon = 1e-7);
        for (i, p) in d.values().iter().enumerate() {
            assert!((p - g.density(d.point(i))).abs() < 1e-8);
        }
    }

    #[test]
    fn scaled_gaussian_matches_wider_gaussian() {
        let d = discretize(&DistSpec::gaussian(0.0, 1.0).unwrap(), 4096, 1e-10).unwrap();
        let s = scale_density(&d, 2.0).unwrap();
        let g = DistSpec::gaussian(0.0, 4.0).unwrap();
        for (i, p) in s.values().iter().enumerate() {
            assert!((p - g.density(s.point(i))).abs() < 1e-6);
        }
    }

    #[test]
    fn scaled_cauchy_matches_closed_form() {
        let d = discretize(&DistSpec::cauchy(1.0, 1.0).unwrap(), 65536, 1e-4).unwrap();
        let s = scale_density(&d, 0.5).unwrap();
        let c = DistSpec::cauchy(0.5, 0.5).unwrap();
        // Renormalization after truncation inflates values by 1 / (1 - 2e-4).
        for (i, p) in s.values().iter().enumerate() {
            assert!((p - c.density(s.point(i))).abs() < 1e-3 * c.density(s.point(i)));
        }
    }

    #[test]
    fn discretize_preconditions() {
        let g = DistSpec::gaussian(0.0, 1.0).unwrap();
        assert!(discretize(&g, 100, 1e-10).is_err());
        assert!(discretize(&g, 32, 1e-10).is_err());
        assert!(discretize(&g, 128, 1e-2).is_err());
    }

    #[test]
    fn mixture_log_cf_matches_direct_sum() {
        let spec: DistSpec = "mixture:w=0.25;0.75,mean=-1;3,var=0.5;1.5".parse().unwrap();
        for w in [0.0, 0.3, 1.7, -2.2] {
            let direct: Complex64 = [(0.25, -1.0, 0.5), (0.75, 3.0, 1.5)]
                .iter()
                .map(|&(wk, m, v)| wk * (Complex64::i() * w * m - 0.5 * v * w * w).exp())
                .sum();
            let got = spec.log_cf(w).unwrap().exp();
            assert!((got - direct).norm() < 1e-14);
        }
    }
}
