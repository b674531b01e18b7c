use std::f64::consts::{E, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridDensity;
use crate::potential::{expected_potential, Potential};
use crate::transport::Coupling;

const FLOOR: f64 = 1e-300;

/// Entropy summary of one grid law (nats, one dimension).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfoReport {
    pub h: f64,
    pub entropy_power: f64,
    pub fisher: Option<f64>,
    pub stam_defect: Option<f64>,
}

/// `-sum p ln p dx` with `0 ln 0 = 0`.
pub fn differential_entropy(d: &GridDensity) -> f64 {
    -d.values().iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>() * d.dx()
}

/// `exp(2h) / (2 pi e)`.
pub fn entropy_power(h: f64) -> f64 {
    (2.0 * h).exp() / (2.0 * PI * E)
}

pub fn info_report(d: &GridDensity) -> InfoReport {
    let h = differential_entropy(d);
    let fisher = fisher_information(d).ok();
    InfoReport {
        h,
        entropy_power: entropy_power(h),
        fisher,
        stam_defect: fisher.map(|j| entropy_power(h) * j),
    }
}

/// `sum p ln(p / q) dx` on aligned grids.
pub fn kl_divergence(p: &GridDensity, q: &GridDensity) -> Result<f64> {
    if !p.aligned_with(q) {
        return Err(Error::GridMismatch);
    }
    let mut acc = 0.0;
    for (i, (&a, &b)) in p.values().iter().zip(q.values()).enumerate() {
        if a > 0.0 {
            if b < FLOOR {
                return Err(Error::SupportMismatch { x: p.point(i) });
            }
            acc += a * (a / b).ln();
        }
    }
    Ok(acc * p.dx())
}

/// Both sides of `D(P_Y || e^{-V}) = E[V(Y)] - h(Y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlIdentity {
    pub lhs: f64,
    pub rhs: f64,
}

impl KlIdentity {
    pub fn gap(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// Tail mass left outside the lattice used for `e^{-V}` in the identity check.
const POTENTIAL_TAIL: f64 = 1e-13;

/// Evaluates the KL identity with `e^{-V}` tabulated on `y`'s lattice, widened
/// to cover the potential's own support.
pub fn kl_identity_check(pot: &Potential, y: &GridDensity) -> Result<KlIdentity> {
    let (x, ye) = common_lattice(pot, y)?;
    let lhs = kl_divergence(&ye, &x)?;
    let rhs = expected_potential(pot, y)? - differential_entropy(y);
    Ok(KlIdentity { lhs, rhs })
}

/// `e^{-V}` and `y` on one aligned lattice with `y`'s spacing and phase.
pub fn common_lattice(pot: &Potential, y: &GridDensity) -> Result<(GridDensity, GridDensity)> {
    let (lo, hi) = pot.tail_points(POTENTIAL_TAIL)?;
    let dx = y.dx();
    let below = ((y.x0() - lo) / dx).ceil().max(0.0) as usize;
    let x0 = y.x0() - below as f64 * dx;
    let last = hi.max(y.x_last());
    let n = ((last - x0) / dx).ceil() as usize + 1;
    let x = GridDensity::tabulate(x0, dx, n, |t| pot.density(t))?;
    let ye = y.embed(x0, n)?;
    Ok((x, ye))
}

fn log_floor(p: f64) -> f64 {
    p.max(FLOOR).ln()
}

/// Derivative of `f` sampled on the grid: centered inside, one-sided at the ends.
fn derivative(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (f[1] - f[0]) / dx
            } else if i == n - 1 {
                (f[n - 1] - f[n - 2]) / dx
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * dx)
            }
        })
        .collect()
}

/// Rejects scores that straddle an interior zero of a density with real mass.
fn check_interior_zeros(d: &GridDensity) -> Result<()> {
    let p = d.values();
    let first = p.iter().position(|v| *v > 0.0).unwrap_or(0);
    let last = p.iter().rposition(|v| *v > 0.0).unwrap_or(0);
    for i in first..=last {
        if p[i] <= 0.0 {
            let near = p[i.saturating_sub(1)].max(p[(i + 1).min(p.len() - 1)]) * d.dx();
            if near > 1e-12 {
                return Err(Error::NumericalFailure(format!(
                    "density vanishes at interior point {} next to mass {near:e}; score diverges",
                    d.point(i)
                )));
            }
        }
    }
    Ok(())
}

/// `J(X) = sum p (d/dx ln p)^2 dx` from finite differences.
pub fn fisher_information(d: &GridDensity) -> Result<f64> {
    check_interior_zeros(d)?;
    let logp: Vec<f64> = d.values().iter().map(|&p| log_floor(p)).collect();
    let score = derivative(&logp, d.dx());
    Ok(d.values().iter().zip(&score).map(|(p, s)| p * s * s).sum::<f64>() * d.dx())
}

/// `sum p (d/dx ln(p / mu))^2 dx` on aligned grids.
pub fn relative_fisher_information(p: &GridDensity, mu: &GridDensity) -> Result<f64> {
    if !p.aligned_with(mu) {
        return Err(Error::GridMismatch);
    }
    for (i, (&a, &b)) in p.values().iter().zip(mu.values()).enumerate() {
        if a > 0.0 && b < FLOOR {
            return Err(Error::SupportMismatch { x: p.point(i) });
        }
    }
    let ratio: Vec<f64> = p
        .values()
        .iter()
        .zip(mu.values())
        .map(|(&a, &b)| log_floor(a) - log_floor(b))
        .collect();
    let score = derivative(&ratio, p.dx());
    Ok(p.values().iter().zip(&score).map(|(a, s)| a * s * s).sum::<f64>() * p.dx())
}

/// `N(X) J(X)`, which is at least one with equality for Gaussians.
pub fn stam_defect(d: &GridDensity) -> Result<f64> {
    Ok(entropy_power(differential_entropy(d)) * fisher_information(d)?)
}

/// Both sides of the reverse entropy power inequality for `y = y1 + y2`,
/// weighting the Stam defects by `theta = N(y2) / (N(y1) + N(y2))`.
pub fn reverse_epi_check(y1: &GridDensity, y2: &GridDensity, y: &GridDensity) -> Result<(f64, f64)> {
    let n1 = entropy_power(differential_entropy(y1));
    let n2 = entropy_power(differential_entropy(y2));
    let lhs = entropy_power(differential_entropy(y));
    let theta = n2 / (n1 + n2);
    let rhs = (n1 + n2) * (theta * stam_defect(y1)? + (1.0 - theta) * stam_defect(y2)?);
    Ok((lhs, rhs))
}

/// `sum P ln(P / (row col))` over a coupling, recomputed from its entries.
pub fn mutual_information(c: &Coupling) -> Result<f64> {
    let total = c.total_mass();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { total });
    }
    let row = c.row_sums();
    let col = c.col_sums();
    let mut acc = 0.0;
    c.for_each_entry(|i, j, p| {
        if p > 0.0 {
            acc += p * (p / (row[i] * col[j])).ln();
        }
    });
    Ok(acc)
}

/// Shannon entropy of a probability vector.
pub fn discrete_entropy(w: &[f64]) -> f64 {
    -w.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}
