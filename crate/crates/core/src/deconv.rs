//! Splitting a law as `Y = Y1 + Y2` with independent parts and measuring the
//! entropy-power share `C = exp(h(Y1) - h(Y))` that survives in `Y1`.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::dist::{discretize, DistSpec};
use crate::error::{Error, Result};
use crate::grid::GridDensity;
use crate::info::{differential_entropy, entropy_power};
use crate::potential::PotentialKind;
use crate::spectral::{frequencies, grid_cf, grid_cf_scaled, inverse_to_grid};

const MAX_CLIP: f64 = 0.05;
const ROUNDTRIP_TOL: f64 = 0.02;
const NYQUIST_FAIL: f64 = 0.5;
const NYQUIST_FLAG: f64 = 1e-3;
const MAX_AUTO_POINTS: usize = 1 << 21;

/// How `Y2` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Closed form where one exists, Gaussian noise for mixtures, scaled copy otherwise.
    Auto,
    ClosedForm,
    ScaledCopy,
    GaussianNoise,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Auto => "auto",
            Strategy::ClosedForm => "closed-form",
            Strategy::ScaledCopy => "scaled-copy",
            Strategy::GaussianNoise => "gaussian-noise",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Strategy::Auto),
            "closed-form" => Ok(Strategy::ClosedForm),
            "scaled-copy" => Ok(Strategy::ScaledCopy),
            "gaussian-noise" => Ok(Strategy::GaussianNoise),
            other => Err(Error::InvalidArgument(format!(
                "unknown strategy '{other}' (expected auto, closed-form, scaled-copy or gaussian-noise)"
            ))),
        }
    }
}

/// The route that produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ScaledCopy,
    GaussianNoise,
    ClosedFormGaussian,
    ClosedFormCauchy,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ScaledCopy => "scaled-copy",
            Method::GaussianNoise => "gaussian-noise",
            Method::ClosedFormGaussian => "closed-form-gaussian",
            Method::ClosedFormCauchy => "closed-form-cauchy",
        })
    }
}

/// Law of the removed part. A scaled copy is `t (Y' - c)` with `c` the
/// center of `Y`, so `Y2` is centered and `Y1` keeps the location of `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Y2Spec {
    ScaledCopy { t: f64 },
    Gaussian { var: f64 },
}

#[derive(Debug, Clone)]
pub struct DeconvResult {
    /// Law of `Y1`. A one-cell grid stands for a point mass.
    pub y1: GridDensity,
    pub y2: Y2Spec,
    pub h_y1: f64,
    pub h_y2: f64,
    pub h_y: f64,
    pub c: f64,
    /// Negative mass removed from the inverse transform before renormalizing.
    pub clipped_mass: f64,
    /// Tikhonov ridge used in the spectral division (zero on analytic routes).
    pub ridge: f64,
    /// `|phi_1|` at the Nyquist frequency relative to its value at zero.
    pub nyquist_ratio: f64,
    /// L1 distance between `y1 * Y2` and the input law, when checked.
    pub roundtrip_l1: Option<f64>,
    pub method: Method,
    pub flags: Vec<String>,
}

impl DeconvResult {
    pub fn reliable(&self) -> bool {
        self.clipped_mass < MAX_CLIP && self.roundtrip_l1.is_none_or(|v| v <= ROUNDTRIP_TOL)
    }

    /// `(N(Y1) + N(Y2), N(Y))`; the first should not exceed the second.
    pub fn epi_sides(&self) -> (f64, f64) {
        (entropy_power(self.h_y1) + entropy_power(self.h_y2), entropy_power(self.h_y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeconvOptions {
    /// Grid `(points, tail mass)`; the law's default when `None`.
    pub grid: Option<(usize, f64)>,
    /// Initial ridge relative to `max |phi_2|^2`.
    pub ridge: f64,
}

impl Default for DeconvOptions {
    fn default() -> Self {
        Self { grid: None, ridge: 1e-12 }
    }
}

/// `C` for Gaussian and Cauchy laws: `sqrt(1 - e^{-2R})` and `1 - e^{-R}`.
pub fn c_closed_form(spec: &DistSpec, r: f64) -> Result<f64> {
    check_budget(r)?;
    match spec {
        DistSpec::Gaussian { .. } => Ok((-(-2.0 * r).exp_m1()).sqrt()),
        DistSpec::Cauchy { .. } => Ok(-(-r).exp_m1()),
        DistSpec::PotentialDefined(p) if matches!(p.kind(), PotentialKind::Quadratic { .. }) => {
            Ok((-(-2.0 * r).exp_m1()).sqrt())
        }
        other => Err(Error::UnsupportedSpec(format!("closed-form C for {other}"))),
    }
}

/// Removes `t Y'` from a grid law by spectral division.
pub fn deconvolve_scaled_copy(y: &GridDensity, t: f64) -> Result<DeconvResult> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidArgument(format!("scale factor must lie in (0, 1), got {t}")));
    }
    let c = y.mean();
    let h_y = differential_entropy(y);
    split(&y.shifted(-c), c, None, Removal::Scaled(t), h_y, 1e-12)
}

/// Removes independent `N(0, sigma2)` noise from a grid law.
pub fn deconvolve_gaussian_noise(y: &GridDensity, sigma2: f64) -> Result<DeconvResult> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise variance must be positive, got {sigma2}")));
    }
    let c = y.mean();
    let yc = y.shifted(-c);
    // Where the law still has spectral content, its cf must decay at least as
    // fast as the noise's, or the quotient is not integrable.
    let phi = grid_cf(&yc);
    let w = frequencies(yc.len(), yc.dx());
    let worst = phi
        .iter()
        .zip(&w)
        .filter(|(p, _)| p.norm() > 1e-8)
        .map(|(p, wk)| p.norm() * (0.5 * sigma2 * wk * wk).exp())
        .fold(0.0, f64::max);
    if worst > 1.0 + 1e-6 {
        return Err(Error::NonIntegrableSpectrum(format!(
            "|phi_Y| exp(sigma2 w^2 / 2) reaches {worst:.3e} for sigma2 = {sigma2}"
        )));
    }
    let h_y = differential_entropy(y);
    split(&yc, c, None, Removal::Gaussian(sigma2), h_y, 1e-12)
}

/// `C(P_Y, R)` for the requested strategy, with `Y2` chosen so that
/// `h(Y) - h(Y2) = R`.
pub fn c_term(spec: &DistSpec, r: f64, strategy: Strategy) -> Result<DeconvResult> {
    c_term_with(spec, r, strategy, &DeconvOptions::default())
}

pub fn c_term_with(spec: &DistSpec, r: f64, strategy: Strategy, opts: &DeconvOptions) -> Result<DeconvResult> {
    check_budget(r)?;
    spec.validate()?;
    let strategy = resolve(spec, strategy);
    let center = center_of(spec)?;
    let centered = spec.shifted(center)?;
    if strategy == Strategy::ClosedForm {
        let (n, tail) = opts.grid.unwrap_or_else(|| spec.default_grid());
        return closed_form(spec, r, center, n, tail);
    }
    let Some((n, tail)) = opts.grid else {
        // Narrow components need a finer lattice over the same span: refine
        // until Y1 is resolved at the Nyquist frequency.
        let (mut n, tail) = spec.default_grid();
        loop {
            let res = c_term_on(spec, &centered, center, r, strategy, n, tail, opts.ridge);
            let coarse = match &res {
                Ok(d) => d.nyquist_ratio > NYQUIST_FLAG,
                Err(Error::GridTooCoarse(_)) => true,
                Err(_) => false,
            };
            if !coarse || n >= MAX_AUTO_POINTS {
                return res;
            }
            n *= 2;
        }
    };
    c_term_on(spec, &centered, center, r, strategy, n, tail, opts.ridge)
}

#[allow(clippy::too_many_arguments)]
fn c_term_on(
    spec: &DistSpec,
    centered: &DistSpec,
    center: f64,
    r: f64,
    strategy: Strategy,
    n: usize,
    tail: f64,
    ridge: f64,
) -> Result<DeconvResult> {
    let yc = discretize(centered, n, tail)?;
    let h_y = differential_entropy(&yc);
    let method = if strategy == Strategy::GaussianNoise { Method::GaussianNoise } else { Method::ScaledCopy };
    if r == 0.0 {
        return Ok(point_mass(&yc, center, h_y, method));
    }
    let lcf = |w: f64| centered.log_cf(w);
    let has_cf = centered.log_cf(0.0).is_some();
    let analytic: Option<&dyn Fn(f64) -> Option<Complex64>> = if has_cf { Some(&lcf) } else { None };
    match strategy {
        Strategy::GaussianNoise => {
            let var = (2.0 * (h_y - r)).exp() / (2.0 * PI * E);
            let limit = gaussian_noise_limit(spec);
            if limit.is_none_or(|v| var >= v - 1e-9) {
                let min_feasible_r = limit.map_or(f64::INFINITY, |v| h_y - 0.5 * (2.0 * PI * E * v).ln());
                return Err(Error::ConstraintInfeasible { r, min_feasible_r });
            }
            split(&yc, center, analytic, Removal::Gaussian(var), h_y, ridge)
        }
        _ => split(&yc, center, analytic, Removal::Scaled((-r).exp()), h_y, ridge),
    }
}

/// The largest `t` such that `X = t X' + X2` with `h(X) - h(X2) <= R`, and
/// the decomposition found for it (`y1` holds `X2`).
pub fn cx_term(spec: &DistSpec, r: f64) -> Result<(f64, DeconvResult)> {
    check_budget(r)?;
    spec.validate()?;
    let center = center_of(spec)?;
    let centered = spec.shifted(center)?;
    let (n, tail) = spec.default_grid();
    let xc = discretize(&centered, n, tail)?;
    let h_x = differential_entropy(&xc);
    if r == 0.0 {
        let res = DeconvResult {
            y1: xc.shifted(center),
            y2: Y2Spec::ScaledCopy { t: 0.0 },
            h_y1: h_x,
            h_y2: f64::NEG_INFINITY,
            h_y: h_x,
            c: 1.0,
            clipped_mass: 0.0,
            ridge: 0.0,
            nyquist_ratio: 0.0,
            roundtrip_l1: Some(0.0),
            method: Method::ScaledCopy,
            flags: Vec::new(),
        };
        return Ok((0.0, res));
    }
    let lcf = |w: f64| centered.log_cf(w);
    let has_cf = centered.log_cf(0.0).is_some();
    let analytic: Option<&dyn Fn(f64) -> Option<Complex64>> = if has_cf { Some(&lcf) } else { None };
    let attempt = |t: f64| -> Option<DeconvResult> {
        let res = split(&xc, center, analytic, Removal::Scaled(t), h_x, 1e-12).ok()?;
        (res.reliable() && h_x - res.h_y1 <= r).then_some(res)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = None;
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        match attempt(mid) {
            Some(res) => {
                lo = mid;
                best = Some(res);
            }
            None => hi = mid,
        }
    }
    match best {
        Some(res) => Ok((lo, res)),
        None => Err(Error::SearchFailed(format!("no t in (0, 1) meets h(X) - h(X2) <= {r} on this grid"))),
    }
}

/// One row of a C-versus-R table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub distribution: String,
    pub strategy: String,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub clipped_mass: f64,
    pub flags: Vec<String>,
}

/// `C` along an ascending grid of budgets, evaluated in parallel.
///
/// Points where the strategy has no valid decomposition fall back to the
/// trivial one (`Y1` a point mass, `C = 0`) and are flagged.
pub fn c_curve(spec: &DistSpec, rs: &[f64], strategy: Strategy) -> Result<Vec<CurvePoint>> {
    c_curve_with(spec, rs, strategy, &DeconvOptions::default())
}

/// [`c_curve`] with explicit grid and ridge settings.
pub fn c_curve_with(spec: &DistSpec, rs: &[f64], strategy: Strategy, opts: &DeconvOptions) -> Result<Vec<CurvePoint>> {
    if rs.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(Error::InvalidArgument("R grid must be finite and nonnegative".into()));
    }
    if rs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("R grid must be sorted ascending".into()));
    }
    let resolved = resolve(spec, strategy);
    let mut pts: Vec<CurvePoint> = rs
        .par_iter()
        .map(|&r| {
            let mut pt = CurvePoint {
                distribution: spec.to_string(),
                strategy: resolved.to_string(),
                r,
                c: 0.0,
                clipped_mass: 0.0,
                flags: Vec::new(),
            };
            match c_term_with(spec, r, resolved, opts) {
                Ok(res) => {
                    pt.strategy = res.method.to_string();
                    pt.c = res.c;
                    pt.clipped_mass = res.clipped_mass;
                    pt.flags = res.flags;
                }
                Err(Error::ConstraintInfeasible { .. }) => pt.flags.push("infeasible:trivial-decomposition".into()),
                Err(Error::GridTooCoarse(_)) => pt.flags.push("grid-too-coarse:trivial-decomposition".into()),
                Err(e) => {
                    pt.c = f64::NAN;
                    pt.flags.push(format!("error:{e}"));
                }
            }
            pt
        })
        .collect();
    let mut run_max = f64::NEG_INFINITY;
    for p in &mut pts {
        if p.c < run_max - 1e-6 {
            p.flags.push("nonmonotone".into());
        }
        if p.c.is_finite() {
            run_max = run_max.max(p.c);
        }
    }
    Ok(pts)
}

#[derive(Debug, Clone, Copy)]
enum Removal {
    Scaled(f64),
    Gaussian(f64),
}

fn check_budget(r: f64) -> Result<()> {
    if r >= 0.0 && !r.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("information budget must be >= 0, got {r}")))
    }
}

fn resolve(spec: &DistSpec, s: Strategy) -> Strategy {
    match (s, spec) {
        (Strategy::Auto, DistSpec::Gaussian { .. } | DistSpec::Cauchy { .. }) => Strategy::ClosedForm,
        (Strategy::Auto, DistSpec::GaussianMixture { .. }) => Strategy::GaussianNoise,
        (Strategy::Auto, _) => Strategy::ScaledCopy,
        (s, _) => s,
    }
}

fn center_of(spec: &DistSpec) -> Result<f64> {
    match spec {
        DistSpec::PotentialDefined(p) => Ok(p.mode()),
        _ => spec.center(),
    }
}

/// Largest admissible noise variance, if Gaussian noise can be removed at all.
fn gaussian_noise_limit(spec: &DistSpec) -> Option<f64> {
    match spec {
        DistSpec::PotentialDefined(p) => match p.kind() {
            PotentialKind::Quadratic { lambda } => Some(1.0 / lambda),
            PotentialKind::QuadraticSoftAbs => None,
        },
        _ => spec.min_component_var(),
    }
}

fn point_mass(yc: &GridDensity, center: f64, h_y: f64, method: Method) -> DeconvResult {
    let y1 = GridDensity::from_values(center, yc.dx(), vec![1.0]).expect("one positive cell");
    DeconvResult {
        y1,
        y2: Y2Spec::ScaledCopy { t: 1.0 },
        h_y1: f64::NEG_INFINITY,
        h_y2: h_y,
        h_y,
        c: 0.0,
        clipped_mass: 0.0,
        ridge: 0.0,
        nyquist_ratio: 1.0,
        roundtrip_l1: Some(0.0),
        method,
        flags: Vec::new(),
    }
}

fn closed_form(spec: &DistSpec, r: f64, center: f64, n: usize, tail: f64) -> Result<DeconvResult> {
    let t = (-r).exp();
    let (y1_spec, method) = match spec {
        DistSpec::Gaussian { var, .. } => (DistSpec::gaussian(center, var * (1.0 - t * t)), Method::ClosedFormGaussian),
        DistSpec::Cauchy { gamma, .. } => (DistSpec::cauchy(center, gamma * (1.0 - t)), Method::ClosedFormCauchy),
        DistSpec::PotentialDefined(p) if matches!(p.kind(), PotentialKind::Quadratic { .. }) => {
            (DistSpec::gaussian(center, (1.0 - t * t) / p.lambda()), Method::ClosedFormGaussian)
        }
        other => return Err(Error::UnsupportedSpec(format!("closed-form C for {other}"))),
    };
    let h_y = spec.entropy().expect("closed-form entropy");
    if r == 0.0 {
        let yc = discretize(&spec.shifted(center)?, n, tail)?;
        return Ok(point_mass(&yc, center, h_y, method));
    }
    let y1_spec = y1_spec?;
    let h_y1 = y1_spec.entropy().expect("closed-form entropy");
    Ok(DeconvResult {
        y1: discretize(&y1_spec, n, tail)?,
        y2: Y2Spec::ScaledCopy { t },
        h_y1,
        h_y2: h_y + t.ln(),
        h_y,
        c: c_closed_form(spec, r)?,
        clipped_mass: 0.0,
        ridge: 0.0,
        nyquist_ratio: 0.0,
        roundtrip_l1: None,
        method,
        flags: Vec::new(),
    })
}

type LogCf<'a> = Option<&'a dyn Fn(f64) -> Option<Complex64>>;

/// Spectral division on the centered grid `yc`; `y1` is moved back by `center`.
///
/// With a closed-form log-cf the quotient is formed in the log domain and
/// needs no ridge; it is used whenever the result is a valid spectrum
/// (`|phi_1| <= 1`). Otherwise the grid cf is divided with a ridge that
/// doubles until the clipped mass drops below 5%.
fn split(yc: &GridDensity, center: f64, lcf: LogCf<'_>, removal: Removal, h_y: f64, ridge0: f64) -> Result<DeconvResult> {
    let n = yc.len();
    let w = frequencies(n, yc.dx());
    let (y2, h_y2, method) = match removal {
        Removal::Scaled(t) => (Y2Spec::ScaledCopy { t }, h_y + t.ln(), Method::ScaledCopy),
        Removal::Gaussian(v) => (Y2Spec::Gaussian { var: v }, 0.5 * (2.0 * PI * E * v).ln(), Method::GaussianNoise),
    };
    let phi2: Vec<Complex64> = match removal {
        Removal::Scaled(t) => grid_cf_scaled(yc, t),
        Removal::Gaussian(v) => w.iter().map(|wk| Complex64::new((-0.5 * v * wk * wk).exp(), 0.0)).collect(),
    };
    let mut flags: Vec<String> = Vec::new();

    let analytic: Option<Vec<Complex64>> = lcf.and_then(|f| {
        let spec1: Option<Vec<Complex64>> = w
            .iter()
            .map(|&wk| {
                let l2 = match removal {
                    Removal::Scaled(t) => f(t * wk)?,
                    Removal::Gaussian(v) => Complex64::new(-0.5 * v * wk * wk, 0.0),
                };
                Some((f(wk)? - l2).exp())
            })
            .collect();
        spec1.filter(|s| s.iter().all(|z| z.norm() <= 1.0 + 1e-9))
    });

    let (phi1, p1, clipped, ridge) = match analytic {
        Some(phi1) => {
            let (p1, clipped) = clip(inverse_to_grid(&phi1, yc.x0(), yc.dx()), yc.dx());
            (phi1, p1, clipped, 0.0)
        }
        None => {
            let phi_y = grid_cf(yc);
            let top = phi2.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
            let mut ridge = ridge0 * top;
            loop {
                let phi1: Vec<Complex64> =
                    phi_y.iter().zip(&phi2).map(|(a, b)| a * b.conj() / (b.norm_sqr() + ridge)).collect();
                let (p1, clipped) = clip(inverse_to_grid(&phi1, yc.x0(), yc.dx()), yc.dx());
                if clipped < MAX_CLIP || ridge > top {
                    if clipped >= MAX_CLIP {
                        flags.push("unreliable:clipped-mass".into());
                    }
                    break (phi1, p1, clipped, ridge);
                }
                ridge *= 2.0;
            }
        }
    };

    let nyquist_ratio = phi1[n / 2].norm() / phi1[0].norm();
    if !(nyquist_ratio <= NYQUIST_FAIL) {
        return Err(Error::GridTooCoarse(format!(
            "Y1 keeps {nyquist_ratio:.3} of its spectrum at the Nyquist frequency; refine the grid"
        )));
    }
    if nyquist_ratio > NYQUIST_FLAG {
        flags.push("nyquist".into());
    }
    let y1c = GridDensity::from_values(yc.x0(), yc.dx(), p1)
        .map_err(|e| Error::NumericalFailure(format!("deconvolved density is unusable: {e}")))?;

    // Convolve back in the frequency domain and compare with the input.
    let back: Vec<Complex64> = grid_cf(&y1c).iter().zip(&phi2).map(|(a, b)| a * b).collect();
    let back = inverse_to_grid(&back, yc.x0(), yc.dx());
    let l1: f64 = back.iter().zip(yc.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() * yc.dx();
    if l1 > ROUNDTRIP_TOL {
        flags.push("roundtrip".into());
    }
    if clipped >= MAX_CLIP && !flags.iter().any(|f| f.starts_with("unreliable")) {
        flags.push("unreliable:clipped-mass".into());
    }

    let h_y1 = differential_entropy(&y1c);
    let raw = (h_y1 - h_y).exp();
    if raw > 1.0 + 1e-9 {
        flags.push("epi-violation".into());
    }
    Ok(DeconvResult {
        y1: y1c.shifted(center),
        y2,
        h_y1,
        h_y2,
        h_y,
        c: raw.min(1.0),
        clipped_mass: clipped,
        ridge,
        nyquist_ratio,
        roundtrip_l1: Some(l1),
        method,
        flags,
    })
}

fn clip(mut p: Vec<f64>, dx: f64) -> (Vec<f64>, f64) {
    let mut neg = 0.0;
    for v in &mut p {
        if *v < 0.0 {
            neg -= *v;
            *v = 0.0;
        }
    }
    (p, neg * dx)
}
