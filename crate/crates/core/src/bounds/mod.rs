//! Right-hand sides of the transport-entropy inequalities, evaluated on grids.
//!
//! `X` is always the reference law `e^{-V}`; `Y` is the second marginal.

mod concentration;
mod epsilon;
mod scenario;

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

pub use concentration::{c_a, concentration_bound, concentration_table, ConcentrationRow, HalfLine, RejectionSampler};
pub use epsilon::{epsilon_term_1d, quantile_map};
pub use scenario::{catalogue, verify_scenario, Scenario, ScenarioRow};

use crate::deconv::cx_term;
use crate::dist::{discretize, DistSpec};
use crate::error::{Error, Result};
use crate::grid::GridDensity;
use crate::info::{common_lattice, differential_entropy, kl_divergence, relative_fisher_information};
use crate::potential::{expected_potential, Potential};
use crate::transport::w2_exact_1d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundName {
    ClassicalTalagrand,
    DimGaussianTalagrand,
    Bolley,
    BaiSinkhorn,
    Hwi,
    Thm3,
    Thm4,
    Concentration,
}

impl BoundName {
    pub const ALL: [BoundName; 8] = [
        BoundName::ClassicalTalagrand,
        BoundName::DimGaussianTalagrand,
        BoundName::Bolley,
        BoundName::BaiSinkhorn,
        BoundName::Hwi,
        BoundName::Thm3,
        BoundName::Thm4,
        BoundName::Concentration,
    ];

    /// Short name used on the command line and in column headers.
    pub fn key(&self) -> &'static str {
        match self {
            BoundName::ClassicalTalagrand => "classical",
            BoundName::DimGaussianTalagrand => "dim_gaussian",
            BoundName::Bolley => "bolley",
            BoundName::BaiSinkhorn => "bai",
            BoundName::Hwi => "hwi",
            BoundName::Thm3 => "thm3",
            BoundName::Thm4 => "thm4",
            BoundName::Concentration => "concentration",
        }
    }

    /// Bounds whose reference law must be the standard Gaussian.
    pub fn needs_standard_gaussian(&self) -> bool {
        matches!(self, BoundName::DimGaussianTalagrand | BoundName::BaiSinkhorn)
    }

    /// Bounds on the unconstrained distance (they ignore `R`).
    pub fn unconstrained(&self) -> bool {
        matches!(self, BoundName::ClassicalTalagrand | BoundName::DimGaussianTalagrand | BoundName::Bolley)
    }
}

impl fmt::Display for BoundName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for BoundName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        BoundName::ALL
            .iter()
            .copied()
            .find(|b| b.key() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown bound '{s}'")))
    }
}

/// Quantities a report was computed from.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundInputs {
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_y: Option<f64>,
    #[serde(rename = "E_Vx", skip_serializing_if = "Option::is_none")]
    pub e_vx: Option<f64>,
    #[serde(rename = "E_Vy", skip_serializing_if = "Option::is_none")]
    pub e_vy: Option<f64>,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fisher: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl: Option<f64>,
}

/// One inequality evaluated at one point. `lhs` and `rhs` share the scale of
/// the inequality as stated: `(lambda/2) W2^2` for most bounds, `W2^2` for
/// the two Gaussian-reference bounds, a probability for concentration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: BoundName,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub inputs: BoundInputs,
    pub flags: Vec<String>,
}

impl BoundReport {
    pub fn new(name: BoundName, r: Option<f64>, lhs: f64, rhs: f64, inputs: BoundInputs) -> Self {
        Self { name, r, lhs, rhs, slack: rhs - lhs, inputs, flags: Vec::new() }
    }

    /// Informational reports never fail a run.
    pub fn informational(&self) -> bool {
        self.flags.iter().any(|f| f.starts_with("informational"))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.informational() || self.slack >= -tol
    }
}

/// Entropies, expected potentials and KL of a pair `(e^{-V}, Y)`, all taken
/// on one lattice so the identities between them hold to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairStats {
    pub lambda: f64,
    pub e_vx: f64,
    pub e_vy: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub kl: f64,
}

impl PairStats {
    pub fn new(pot: &Potential, y: &GridDensity) -> Result<Self> {
        let (x, ye) = common_lattice(pot, y)?;
        check_tail_moment(&ye, |v| pot.eval(v))?;
        Ok(Self {
            lambda: pot.lambda(),
            e_vx: expected_potential(pot, &x)?,
            e_vy: expected_potential(pot, &ye)?,
            h_x: differential_entropy(&x),
            h_y: differential_entropy(&ye),
            kl: kl_divergence(&ye, &x)?,
        })
    }

    fn inputs(&self) -> BoundInputs {
        BoundInputs {
            lambda: Some(self.lambda),
            h_x: Some(self.h_x),
            h_y: Some(self.h_y),
            e_vx: Some(self.e_vx),
            e_vy: Some(self.e_vy),
            kl: Some(self.kl),
            ..BoundInputs::default()
        }
    }

    /// `E[V(Y)] - E[V(X)] + 1 - c e^{h(Y) - h(X)}`, the common shape.
    pub fn dimensional(&self, c: f64) -> f64 {
        self.e_vy - self.e_vx + 1.0 - c * (self.h_y - self.h_x).exp()
    }
}

/// `sqrt(2 kl / lambda)`, a bound on `W2`.
pub fn classical_talagrand_rhs(lambda: f64, kl: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(kl >= -1e-10) {
        return Err(Error::InvalidArgument(format!("need lambda > 0 and kl >= 0, got {lambda}, {kl}")));
    }
    Ok((2.0 * kl.max(0.0) / lambda).sqrt())
}

/// Dimensional bound on `(lambda/2) W2^2` without an information budget.
pub fn bolley_rhs(pot: &Potential, y: &GridDensity) -> Result<f64> {
    Ok(PairStats::new(pot, y)?.dimensional(1.0))
}

/// Bound on `(lambda/2) W2^2(P_X, P_Y; R)` given `C(P_Y, R)`.
pub fn thm3_rhs(pot: &Potential, y: &GridDensity, c: f64) -> Result<f64> {
    check_c(c)?;
    Ok(PairStats::new(pot, y)?.dimensional(c))
}

/// Bound on `W2^2(N(0,1), P_Y; R)`.
pub fn bai_sinkhorn_rhs(y: &GridDensity, r: f64) -> Result<f64> {
    check_budget(r)?;
    check_tail_moment(y, |v| v * v)?;
    let k = (-(-2.0 * r).exp_m1() / (2.0 * PI * E)).sqrt();
    Ok(y.second_moment() + 1.0 - 2.0 * k * differential_entropy(y).exp())
}

/// Bound on `W2^2(N(0,1), P_Y)`.
pub fn dim_gaussian_rhs(y: &GridDensity) -> Result<f64> {
    check_tail_moment(y, |v| v * v)?;
    let kl = PairStats::new(&Potential::quadratic(1.0)?, y)?.kl;
    let m2 = y.second_moment();
    Ok(m2 + 1.0 - 2.0 * (0.5 * (m2 - 1.0 - 2.0 * kl)).exp())
}

/// HWI-type bound on `(lambda/2) W2^2(P_X, P_Y; R)` for any `x` absolutely
/// continuous with respect to `mu = e^{-V}`, given the `Y1` part of a valid
/// decomposition of `y`. A one-cell `y1` is a point mass.
pub fn hwi_rhs(pot: &Potential, x: &GridDensity, y1: &GridDensity, y: &GridDensity) -> Result<f64> {
    Ok(hwi_terms(pot, x, y1, y)?.0)
}

/// `(rhs, fisher)` of [`hwi_rhs`].
pub fn hwi_terms(pot: &Potential, x: &GridDensity, y1: &GridDensity, y: &GridDensity) -> Result<(f64, f64)> {
    let mu = GridDensity::tabulate(x.x0(), x.dx(), x.len(), |v| pot.density(v))?;
    let fisher = relative_fisher_information(x, &mu)?;
    let h_x = differential_entropy(x);
    let e_vx = expected_potential(pot, x)?;
    check_tail_moment(y, |v| pot.eval(v))?;
    let e_vy = expected_potential(pot, y)?;
    let share = (component_entropy(y1) - h_x).exp();
    let w = w2_exact_1d(x, y1);
    Ok((e_vy - e_vx + 1.0 - share + w * fisher.sqrt(), fisher))
}

/// Terms of the linear-combination bound on `(lambda/2) W2^2(P_X, P_Y; R)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thm4 {
    pub rhs: f64,
    pub t: f64,
    pub eps_term: Option<f64>,
    pub stats: PairStats,
    pub flags: Vec<String>,
}

impl Thm4 {
    pub fn report(&self, r: f64, lhs: f64) -> BoundReport {
        let mut inputs = self.stats.inputs();
        inputs.r = Some(r);
        inputs.t = Some(self.t);
        inputs.eps_term = self.eps_term;
        let mut rep = BoundReport::new(BoundName::Thm4, Some(r), lhs, self.rhs, inputs);
        rep.flags = self.flags.clone();
        rep
    }
}

/// `E[V(Y)] - E[V(X)] + 1 - t e^{h(Y) - h(X)} + eps` with `t` the largest
/// admissible weight of a scaled copy inside `X` and `eps` the linearity
/// defect of `V'` along that split.
///
/// If `eps` cannot be computed the report is flagged `partial` and `rhs`
/// omits it.
pub fn thm4_rhs(pot: &Potential, y: &GridDensity, r: f64) -> Result<Thm4> {
    check_budget(r)?;
    let stats = PairStats::new(pot, y)?;
    let spec = DistSpec::PotentialDefined(*pot);
    let mut flags = Vec::new();
    let (t, x2) = if r == 0.0 {
        (0.0, None)
    } else {
        let (t, res) = cx_term(&spec, r)?;
        flags.extend(res.flags.iter().cloned());
        (t, Some(res.y1))
    };
    let eps_term = match &x2 {
        None => Some(0.0),
        Some(x2) => {
            let (n, tail) = spec.default_grid();
            let x = discretize(&spec, n, tail)?;
            match epsilon_term_1d(pot, &x, y, t, x2) {
                Ok(e) => Some(e),
                Err(_) => {
                    flags.push("partial:epsilon-unavailable".into());
                    None
                }
            }
        }
    };
    let rhs = stats.dimensional(t) + eps_term.unwrap_or(0.0);
    Ok(Thm4 { rhs, t, eps_term, stats, flags })
}

pub(crate) fn check_budget(r: f64) -> Result<()> {
    if r >= 0.0 && !r.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("information budget must be >= 0, got {r}")))
    }
}

fn check_c(c: f64) -> Result<()> {
    if (0.0..=1.0 + 1e-9).contains(&c) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("C must lie in [0, 1], got {c}")))
    }
}

/// Entropy of a grid law, with a one-cell grid read as a point mass.
pub fn component_entropy(d: &GridDensity) -> f64 {
    if d.len() == 1 {
        f64::NEG_INFINITY
    } else {
        differential_entropy(d)
    }
}

/// Rejects laws whose moment `E[f(Y)]` is dominated by the outer cells of the
/// grid: the truncated value then depends on the grid span, as for Cauchy.
fn check_tail_moment<F: Fn(f64) -> f64>(y: &GridDensity, f: F) -> Result<()> {
    let n = y.len();
    if n < 40 {
        return Ok(());
    }
    let edge = n / 20;
    let mut total = 0.0;
    let mut outer = 0.0;
    for (i, &p) in y.values().iter().enumerate() {
        let v = f(y.point(i)).abs() * p;
        total += v;
        if i < edge || i >= n - edge {
            outer += v;
        }
    }
    if !total.is_finite() || outer > 1e-3 * total {
        return Err(Error::NonFinite(format!(
            "moment is carried by the grid edges ({:.2}% in the outer 5%); heavy tails are not supported",
            100.0 * outer / total
        )));
    }
    Ok(())
}
