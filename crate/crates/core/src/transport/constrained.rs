use crate::error::{Error, Result};
use crate::grid::GridDensity;

use super::coupling::Coupling;
use super::exact::monotone_coupling;
use super::sinkhorn::{sinkhorn_with, Duals, SinkhornOptions, SinkhornSolution};

// Accepted window for the achieved information around the budget.
const BELOW: f64 = 2.5e-4;
const ABOVE: f64 = 2.5e-5;
const MAX_PROBES: usize = 120;

/// Minimal `E[(X - Y)^2]` over couplings with `I(X;Y) <= r`.
///
/// The entropic strength is tuned by a safeguarded search on `ln eps` until
/// the plan's discrete mutual information sits just under `r`. When the
/// monotone plan already satisfies the budget it is returned with `eps = 0`.
pub fn sinkhorn_constrained(p: &GridDensity, q: &GridDensity, r: f64, tol: f64) -> Result<SinkhornSolution> {
    ConstrainedSolver::new(SinkhornOptions { tol, ..SinkhornOptions::default() }).solve(p, q, r)
}

/// Constrained solver that reuses the last duals as a warm start, which
/// makes sweeps over `R` on one pair of marginals much cheaper.
#[derive(Debug, Clone)]
pub struct ConstrainedSolver {
    opts: SinkhornOptions,
    warm: Option<(usize, usize, Duals)>,
}

impl ConstrainedSolver {
    pub fn new(opts: SinkhornOptions) -> Self {
        Self { opts, warm: None }
    }

    pub fn options(&self) -> &SinkhornOptions {
        &self.opts
    }

    pub fn solve(&mut self, p: &GridDensity, q: &GridDensity, r: f64) -> Result<SinkhornSolution> {
        if !(r >= 0.0) || r.is_nan() {
            return Err(Error::InvalidArgument(format!("information budget must be >= 0, got {r}")));
        }
        if r == 0.0 {
            let coupling = Coupling::product(p.clone(), q.clone());
            return Ok(SinkhornSolution {
                w2_sq: coupling.cost(),
                coupling,
                eps: f64::INFINITY,
                iterations: 0,
                marginal_err: 0.0,
                r_used: 0.0,
                converged: true,
            });
        }
        let mono = monotone_coupling(p, q)?;
        if mono.mi() <= r {
            let (er, ec) = mono.marginal_errors();
            return Ok(SinkhornSolution {
                w2_sq: mono.cost(),
                coupling: mono,
                eps: 0.0,
                iterations: 0,
                marginal_err: er.max(ec),
                r_used: r,
                converged: true,
            });
        }

        let full = self.opts;
        let probe_opts = SinkhornOptions { tol: full.tol.max(1e-8), ..full };
        let mut probes: Vec<(f64, f64)> = Vec::new();
        let fail = |probes: &[(f64, f64)]| Error::BracketFailure { target: r, probes: probes.to_vec() };

        let (sx, sy) = (p.variance().sqrt(), q.variance().sqrt());
        let rho = (-(-2.0 * r).exp_m1()).sqrt().clamp(1e-6, 1.0 - 1e-12);
        let eps0 = (2.0 * sx * sy * (1.0 - rho * rho) / rho).max(1e-12);

        let run = |eps: f64, opts: &SinkhornOptions, this: &mut Self| -> Result<SinkhornSolution> {
            let warm = match &this.warm {
                Some((n, m, d)) if *n == p.len() && *m == q.len() => Some(d),
                _ => None,
            };
            let sol = sinkhorn_with(p, q, eps, opts, warm)?;
            if let Some(d) = sol.duals() {
                this.warm = Some((p.len(), q.len(), d.clone()));
            }
            Ok(sol)
        };

        // Bracket: `lo` has mi above the budget, `hi` below it.
        let first = run(eps0, &probe_opts, self)?;
        probes.push((eps0, first.mi()));
        let mut best: Option<SinkhornSolution>;
        let (mut lo, mut hi);
        if first.mi() > r {
            lo = (eps0.ln(), first.mi() - r);
            let mut prev = first.mi();
            let mut eps = eps0;
            loop {
                eps *= 2.0;
                let s = run(eps, &probe_opts, self)?;
                probes.push((eps, s.mi()));
                if s.mi() > prev + 1e-9 || probes.len() > 60 {
                    return Err(fail(&probes));
                }
                prev = s.mi();
                if s.mi() <= r {
                    hi = (eps.ln(), s.mi() - r);
                    best = Some(s);
                    break;
                }
                lo = (eps.ln(), s.mi() - r);
            }
        } else {
            hi = (eps0.ln(), first.mi() - r);
            let mut prev = first.mi();
            let mut eps = eps0;
            best = Some(first);
            loop {
                eps *= 0.5;
                let s = run(eps, &probe_opts, self)?;
                probes.push((eps, s.mi()));
                if s.mi() < prev - 1e-9 || probes.len() > 60 {
                    return Err(fail(&probes));
                }
                prev = s.mi();
                if s.mi() > r {
                    lo = (eps.ln(), s.mi() - r);
                    break;
                }
                hi = (eps.ln(), s.mi() - r);
                best = Some(s);
            }
        }

        // Illinois false position on ln eps; mi falls as eps grows. The
        // endpoint values get halved, so the true ones are kept for checks.
        let (mut lo_mi, mut hi_mi) = (lo.1, hi.1);
        let mut side = 0i8;
        let mut polished = false;
        loop {
            if let Some((eps, gap)) = best.as_ref().map(|s: &SinkhornSolution| (s.eps, s.mi() - r)) {
                if (-BELOW..=ABOVE).contains(&gap) || hi.0 - lo.0 < 1e-12 {
                    if polished || probe_opts.tol <= full.tol {
                        break;
                    }
                    let s = run(eps, &full, self)?;
                    probes.push((s.eps, s.mi()));
                    polished = true;
                    let gap = s.mi() - r;
                    if gap <= ABOVE {
                        hi = (s.eps.ln(), gap);
                        hi_mi = gap;
                        best = Some(s);
                        if gap >= -BELOW {
                            break;
                        }
                    } else {
                        lo = (s.eps.ln(), gap);
                        lo_mi = gap;
                    }
                }
            }
            if probes.len() >= MAX_PROBES {
                break;
            }
            let x = (lo.0 * hi.1 - hi.0 * lo.1) / (hi.1 - lo.1);
            let x = if x > lo.0 && x < hi.0 { x } else { 0.5 * (lo.0 + hi.0) };
            let opts = if polished { full } else { probe_opts };
            let s = run(x.exp(), &opts, self)?;
            let y = s.mi() - r;
            probes.push((s.eps, s.mi()));
            if y > lo_mi + 1e-9 || y < hi_mi - 1e-9 {
                return Err(fail(&probes));
            }
            if y > 0.0 {
                lo = (x, y);
                lo_mi = y;
                if side == -1 {
                    hi.1 *= 0.5;
                }
                side = -1;
            } else {
                hi = (x, y);
                hi_mi = y;
                if side == 1 {
                    lo.1 *= 0.5;
                }
                side = 1;
                best = Some(s);
            }
        }
        let mut sol = best.ok_or_else(|| fail(&probes))?;
        if !polished && probe_opts.tol > full.tol {
            sol = run(sol.eps, &full, self)?;
        }
        sol.r_used = r;
        Ok(sol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{discretize, DistSpec};
    use crate::transport::gaussian_sinkhorn_oracle;
    use approx::assert_relative_eq;

    fn unit(n: usize) -> GridDensity {
        discretize(&DistSpec::gaussian(0.0, 1.0).unwrap(), n, 1e-10).unwrap()
    }

    #[test]
    fn zero_budget_gives_product() {
        let p = unit(512);
        let s = sinkhorn_constrained(&p, &p, 0.0, 1e-9).unwrap();
        assert_eq!(s.mi(), 0.0);
        assert_relative_eq!(s.w2_sq, 2.0, epsilon = 1e-3);
    }

    #[test]
    fn ln2_budget_matches_gaussian_oracle() {
        let p = unit(1024);
        let r = 2f64.ln();
        let s = sinkhorn_constrained(&p, &p, r, 1e-9).unwrap();
        assert!(s.converged);
        assert!(s.mi() <= r + 1e-4 && (s.mi() - r).abs() <= 1e-3);
        assert_relative_eq!(s.w2_sq, gaussian_sinkhorn_oracle(1.0, 1.0, 0.0, r), epsilon = 5e-3);
    }

    #[test]
    fn large_budget_is_the_monotone_plan() {
        let p = unit(1024);
        let s = sinkhorn_constrained(&p, &p, 20.0, 1e-9).unwrap();
        assert_eq!(s.eps, 0.0);
        assert!(s.w2_sq <= 1e-2);
    }

    #[test]
    fn sweep_is_monotone_and_feasible() {
        let p = unit(512);
        let q = discretize(&DistSpec::gaussian(0.5, 2.0).unwrap(), 512, 1e-10).unwrap();
        let mut solver = ConstrainedSolver::new(SinkhornOptions::default());
        let mut prev = f64::INFINITY;
        for r in [0.05, 0.2, 0.5, 1.0, 1.5] {
            let s = solver.solve(&p, &q, r).unwrap();
            assert!(s.mi() <= r + 1e-4, "mi {} above {r}", s.mi());
            assert!(s.w2_sq <= prev + 1e-4);
            let (er, ec) = s.coupling.marginal_errors();
            assert!(er < 1e-6 && ec < 1e-6);
            prev = s.w2_sq;
        }
    }

    #[test]
    fn rejects_negative_budget() {
        let p = unit(64);
        assert!(matches!(sinkhorn_constrained(&p, &p, -1.0, 1e-9), Err(Error::InvalidArgument(_))));
    }
}
