use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::Potential;

/// `sqrt((2 / lambda) ln(1 / mu_a))`.
pub fn c_a(lambda: f64, mu_a: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(mu_a > 0.0 && mu_a < 1.0) {
        return Err(Error::InvalidArgument(format!("need lambda > 0 and mu(A) in (0, 1), got {lambda}, {mu_a}")));
    }
    Ok((2.0 / lambda * (1.0 / mu_a).ln()).sqrt())
}

/// `C^{-1} exp(-lambda (r - c_A)^2 / 2)`, valid for `r >= c_A`.
pub fn concentration_bound(lambda: f64, c: f64, mu_a: f64, r: f64) -> Result<f64> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidArgument(format!("C must lie in (0, 1], got {c}")));
    }
    let ca = c_a(lambda, mu_a)?;
    if !(r >= ca) {
        return Err(Error::OutOfRange { r, c_a: ca });
    }
    Ok((-0.5 * lambda * (r - ca).powi(2)).exp() / c)
}

/// The set `A = (-inf, a]`; its `r`-enlargement complement is `(a + r, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfLine {
    pub a: f64,
}

/// Exact sampler for `e^{-V}` by rejection from `N(mode, 1/lambda)`.
///
/// Strong convexity gives `V(x) >= V(m) + lambda (x - m)^2 / 2` around the
/// minimizer `m`, so the acceptance ratio never exceeds one.
#[derive(Debug, Clone)]
pub struct RejectionSampler {
    pot: Potential,
    rng: ChaCha8Rng,
    proposal: Normal<f64>,
    v_mode: f64,
    pub attempts: u64,
    pub accepted: u64,
}

impl RejectionSampler {
    pub fn new(pot: &Potential, seed: u64) -> Result<Self> {
        let m = pot.mode();
        let proposal = Normal::new(m, 1.0 / pot.lambda().sqrt())
            .map_err(|e| Error::InvalidArgument(format!("proposal: {e}")))?;
        Ok(Self { pot: *pot, rng: ChaCha8Rng::seed_from_u64(seed), proposal, v_mode: pot.eval(m), attempts: 0, accepted: 0 })
    }

    pub fn sample(&mut self, n: usize) -> Result<Vec<f64>> {
        let m = self.pot.mode();
        let lambda = self.pot.lambda();
        let budget = self.attempts + 1000 * n as u64 + 1000;
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.attempts >= budget {
                return Err(Error::SamplerExhausted { attempts: self.attempts, accepted: self.accepted });
            }
            self.attempts += 1;
            let x = self.proposal.sample(&mut self.rng);
            let log_ratio = -self.pot.eval(x) + self.v_mode + 0.5 * lambda * (x - m).powi(2);
            if self.rng.random::<f64>().ln() < log_ratio.min(0.0) {
                self.accepted += 1;
                out.push(x);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub r: f64,
    pub c_a: f64,
    pub monte_carlo_mu_ar: f64,
    pub mc_stderr: f64,
    pub analytic_bound: f64,
    /// Monte Carlo estimate within three standard errors of the bound.
    pub pass: bool,
}

/// Monte Carlo `mu(A_r)` against the analytic bound along `rs`.
pub fn concentration_table(
    pot: &Potential,
    set: HalfLine,
    c: f64,
    rs: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<ConcentrationRow>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mu_a = pot.cdf(set.a)?;
    let lambda = pot.lambda();
    let ca = c_a(lambda, mu_a)?;
    let bounds: Vec<f64> = rs.iter().map(|&r| concentration_bound(lambda, c, mu_a, r)).collect::<Result<_>>()?;
    let mut xs = RejectionSampler::new(pot, seed)?.sample(samples)?;
    xs.sort_by(f64::total_cmp);
    let n = samples as f64;
    Ok(rs
        .iter()
        .zip(bounds)
        .map(|(&r, bound)| {
            let above = xs.len() - xs.partition_point(|&x| x <= set.a + r);
            let p = above as f64 / n;
            let se = (p * (1.0 - p) / n).sqrt();
            ConcentrationRow { r, c_a: ca, monte_carlo_mu_ar: p, mc_stderr: se, analytic_bound: bound, pass: p <= bound + 3.0 * se }
        })
        .collect())
}
