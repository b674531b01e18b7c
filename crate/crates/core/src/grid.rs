use crate::error::{Error, Result};

/// A probability density sampled on a uniform grid `x_i = x0 + i * dx`.
///
/// Each sample stands for the cell `[x_i - dx/2, x_i + dx/2]`, so the mass of
/// point `i` is `p_i * dx` and `sum(p) * dx == 1`. Values are nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    x0: f64,
    dx: f64,
    p: Vec<f64>,
}

impl GridDensity {
    /// Builds a density from raw values, rescaling them to unit mass.
    pub fn from_values(x0: f64, dx: f64, mut p: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) || !x0.is_finite() {
            return Err(Error::InvalidArgument(format!("bad grid: x0 = {x0}, dx = {dx}")));
        }
        if p.is_empty() {
            return Err(Error::InvalidArgument("empty grid".into()));
        }
        if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::NonFinite(format!("density value {v}")));
        }
        let mass: f64 = p.iter().sum::<f64>() * dx;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::NumericalFailure(format!("density has mass {mass}")));
        }
        let inv = 1.0 / mass;
        p.iter_mut().for_each(|v| *v *= inv);
        Ok(Self { x0, dx, p })
    }

    /// Samples `f` at `n` grid points and normalizes.
    pub fn tabulate<F: Fn(f64) -> f64>(x0: f64, dx: f64, n: usize, f: F) -> Result<Self> {
        let p = (0..n).map(|i| f(x0 + i as f64 * dx)).collect();
        Self::from_values(x0, dx, p)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn point(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x_last(&self) -> f64 {
        self.point(self.p.len() - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.p.len()).map(move |i| self.point(i))
    }

    /// Point masses `p_i * dx`.
    pub fn weights(&self) -> Vec<f64> {
        self.p.iter().map(|v| v * self.dx).collect()
    }

    pub fn mass(&self) -> f64 {
        self.p.iter().sum::<f64>() * self.dx
    }

    /// `sum f(x_i) p_i dx`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.p
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, v)| f(self.point(i)) * v)
            .sum::<f64>()
            * self.dx
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn second_moment(&self) -> f64 {
        self.expect(|x| x * x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m))
    }

    /// True when both grids share origin, spacing and length (to 1e-9 of a cell).
    pub fn aligned_with(&self, other: &GridDensity) -> bool {
        self.p.len() == other.p.len()
            && ((self.dx - other.dx) / self.dx).abs() < 1e-12
            && ((self.x0 - other.x0) / self.dx).abs() < 1e-9
    }

    /// Law of `X + shift`.
    pub fn shifted(&self, shift: f64) -> GridDensity {
        GridDensity { x0: self.x0 + shift, dx: self.dx, p: self.p.clone() }
    }

    /// Linear interpolation of the density, zero outside the sampled range.
    pub fn interpolate(&self, x: f64) -> f64 {
        let u = (x - self.x0) / self.dx;
        if u < 0.0 || u > (self.p.len() - 1) as f64 {
            return 0.0;
        }
        let i = u.floor() as usize;
        if i + 1 >= self.p.len() {
            return self.p[self.p.len() - 1];
        }
        let frac = u - i as f64;
        self.p[i] * (1.0 - frac) + self.p[i + 1] * frac
    }

    /// Cumulative masses at the right edge of each cell.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.p
            .iter()
            .map(|v| {
                acc += v * self.dx;
                acc
            })
            .collect()
    }

    /// Distribution function of the piecewise-constant (cell) interpretation.
    pub fn cdf(&self, x: f64) -> f64 {
        let u = (x - self.x0) / self.dx + 0.5;
        if u <= 0.0 {
            return 0.0;
        }
        let n = self.p.len();
        if u >= n as f64 {
            return 1.0;
        }
        let i = u.floor() as usize;
        let below: f64 = self.p[..i].iter().sum::<f64>() * self.dx;
        (below + self.p[i] * self.dx * (u - i as f64)).min(1.0)
    }

    /// Quantile function of the cell interpretation (piecewise linear in `u`).
    pub fn quantile(&self, u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0);
        let mut acc = 0.0;
        let left = self.x0 - 0.5 * self.dx;
        for (i, v) in self.p.iter().enumerate() {
            let w = v * self.dx;
            if w > 0.0 && acc + w >= target {
                return left + self.dx * (i as f64 + (target - acc) / w);
            }
            acc += w;
        }
        left + self.dx * self.p.len() as f64
    }

    /// Re-samples this density onto another uniform grid by linear interpolation.
    pub fn resample(&self, x0: f64, dx: f64, n: usize) -> Result<GridDensity> {
        GridDensity::tabulate(x0, dx, n, |x| self.interpolate(x))
    }

    /// Zero-pads onto a wider grid with the same spacing and phase.
    ///
    /// `x0` must lie on this grid's lattice at or left of the current origin.
    pub fn embed(&self, x0: f64, n: usize) -> Result<GridDensity> {
        let offset = (self.x0 - x0) / self.dx;
        let k = offset.round();
        if (offset - k).abs() > 1e-6 || k < 0.0 || k as usize + self.p.len() > n {
            return Err(Error::GridMismatch);
        }
        let mut p = vec![0.0; n];
        p[k as usize..k as usize + self.p.len()].copy_from_slice(&self.p);
        Ok(GridDensity { x0, dx: self.dx, p })
    }
}

/// Law of `t X` for `t > 0`: the grid is stretched by `t` and values divided by `t`.
pub fn scale_density(d: &GridDensity, t: f64) -> Result<GridDensity> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale factor must be positive, got {t}")));
    }
    Ok(GridDensity { x0: d.x0 * t, dx: d.dx * t, p: d.p.iter().map(|v| v / t).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn std_normal(n: usize) -> GridDensity {
        let l = 8.0;
        let dx = 2.0 * l / (n - 1) as f64;
        GridDensity::tabulate(-l, dx, n, |x| (-0.5 * x * x).exp()).unwrap()
    }

    #[test]
    fn normalizes_to_unit_mass() {
        let d = GridDensity::from_values(0.0, 0.5, vec![1.0, 3.0, 2.0]).unwrap();
        assert_relative_eq!(d.mass(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_negative_and_degenerate() {
        assert!(GridDensity::from_values(0.0, 1.0, vec![1.0, -1.0]).is_err());
        assert!(GridDensity::from_values(0.0, 1.0, vec![0.0, 0.0]).is_err());
        assert!(GridDensity::from_values(0.0, 0.0, vec![1.0]).is_err());
        assert!(GridDensity::from_values(0.0, 1.0, vec![f64::NAN]).is_err());
    }

    #[test]
    fn moments_of_normal() {
        let d = std_normal(4097);
        assert!(d.mean().abs() < 1e-14);
        assert_relative_eq!(d.variance(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn scaling_identity_and_law() {
        let d = std_normal(2049);
        assert_eq!(scale_density(&d, 1.0).unwrap(), d);
        let s = scale_density(&d, 2.0).unwrap();
        assert_relative_eq!(s.variance(), 4.0, epsilon = 1e-9);
        assert_relative_eq!(s.mass(), 1.0, epsilon = 1e-12);
        assert!(scale_density(&d, 0.0).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = std_normal(1025);
        for u in [0.01, 0.2, 0.5, 0.77, 0.999] {
            assert_relative_eq!(d.cdf(d.quantile(u)), u, epsilon = 1e-12);
        }
    }

    #[test]
    fn embed_pads_with_zeros() {
        let d = GridDensity::from_values(1.0, 0.5, vec![1.0, 1.0]).unwrap();
        let e = d.embed(0.0, 6).unwrap();
        assert_eq!(e.values(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(d.embed(0.25, 6).is_err());
    }
}
