//! Log-domain Sinkhorn iterations for the squared-distance cost on 1-D grids.
//!
//! With `c_ij = (x_i - y_j)^2` the row update reads
//! `f_i = x_i^2 - eps * L(2 x_i / eps)` where `L(s) = ln sum_j exp(h_j + s y_j)`
//! and `h_j = (g_j - y_j^2) / eps + ln b_j`. For each row only the terms within
//! `CUT` nats of the row maximum are summed. The maximizer is tracked on the
//! upper convex hull of `(y_j, h_j)`, where it moves monotonically in `s`.

use crate::error::{Error, Result};
use crate::grid::GridDensity;

use super::coupling::{Coupling, Plan};

/// Terms more than `CUT` nats below the row maximum are dropped (relative
/// contribution below `n * exp(-CUT)`).
const CUT: f64 = 40.0;
/// Recurrence steps between exact re-evaluations of a term.
const REANCHOR: usize = 64;

/// Support of one marginal: a contiguous run of grid points and log weights.
#[derive(Debug, Clone)]
pub(crate) struct Side {
    first: usize,
    x0: f64,
    dx: f64,
    lw: Vec<f64>,
}

impl Side {
    fn new(d: &GridDensity) -> Result<Self> {
        let w = d.values();
        let first = w.iter().position(|v| *v > 0.0).ok_or(Error::NotNormalized { total: 0.0 })?;
        let last = w.iter().rposition(|v| *v > 0.0).expect("nonempty");
        let lw = w[first..=last]
            .iter()
            .map(|&v| if v > 0.0 { (v * d.dx()).ln() } else { f64::NEG_INFINITY })
            .collect();
        Ok(Self { first, x0: d.point(first), dx: d.dx(), lw })
    }

    fn len(&self) -> usize {
        self.lw.len()
    }

    fn pt(&self, k: usize) -> f64 {
        self.x0 + k as f64 * self.dx
    }
}

/// Upper envelope machinery for `j -> h_j + s y_j` with `y_j = y0 + j dy`.
struct Envelope<'a> {
    h: &'a [f64],
    y0: f64,
    dy: f64,
    hull: Vec<usize>,
    step: Vec<f64>,
}

impl<'a> Envelope<'a> {
    fn new(h: &'a [f64], y0: f64, dy: f64) -> Self {
        let mut hull: Vec<usize> = Vec::new();
        for (j, &hj) in h.iter().enumerate() {
            if !hj.is_finite() {
                continue;
            }
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                let cross = (h[b] - h[a]) * (j - a) as f64 - (hj - h[a]) * (b - a) as f64;
                if cross <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(j);
        }
        let step = (0..h.len())
            .map(|j| {
                if j == 0 {
                    return f64::NAN;
                }
                let d = h[j] - h[j - 1];
                if d.is_finite() && d.abs() < 700.0 {
                    d.exp()
                } else {
                    f64::NAN
                }
            })
            .collect();
        Self { h, y0, dy, hull, step }
    }

    #[inline]
    fn val(&self, j: usize, s: f64) -> f64 {
        self.h[j] + s * (self.y0 + j as f64 * self.dy)
    }

    /// Visits each row `s` (ascending) with its maximum `m`, the first index of
    /// its window and the window terms `exp(h_j + s y_j - m)`.
    fn rows<F: FnMut(usize, f64, usize, &[f64])>(&self, s: &[f64], mut each: F) {
        let hull = &self.hull;
        let last = hull.len() - 1;
        let mut k = 0usize;
        let mut buf: Vec<f64> = Vec::with_capacity(self.h.len());
        for (i, &si) in s.iter().enumerate() {
            while k < last && self.val(hull[k + 1], si) >= self.val(hull[k], si) {
                k += 1;
            }
            let m = self.val(hull[k], si);
            let floor = m - CUT;
            // Smallest hull position left of k still above the floor.
            let (mut lo, mut hi) = (0usize, k);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if self.val(hull[mid], si) >= floor {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            let jl = hull[lo.saturating_sub(1)];
            // Largest hull position right of k still above the floor.
            let (mut lo2, mut hi2) = (k, last);
            while lo2 < hi2 {
                let mid = (lo2 + hi2).div_ceil(2);
                if self.val(hull[mid], si) >= floor {
                    lo2 = mid;
                } else {
                    hi2 = mid - 1;
                }
            }
            let jr = hull[(lo2 + 1).min(last)];

            let anchor = hull[k];
            buf.clear();
            buf.resize(jr - jl + 1, 0.0);
            buf[anchor - jl] = 1.0;
            let r = (si * self.dy).exp();
            let rinv = 1.0 / r;
            let fast = r.is_finite() && rinv.is_finite() && r > 0.0;
            let direct = |j: usize| {
                let v = self.val(j, si) - m;
                if v.is_finite() {
                    v.exp()
                } else {
                    0.0
                }
            };
            let mut t = 1.0;
            for j in anchor + 1..=jr {
                let st = self.step[j];
                t = if fast && st.is_finite() && (j - anchor) % REANCHOR != 0 && t > 1e-250 {
                    t * (st * r)
                } else {
                    direct(j)
                };
                buf[j - jl] = t;
            }
            t = 1.0;
            for j in (jl..anchor).rev() {
                let st = self.step[j + 1];
                t = if fast && st.is_finite() && (anchor - j) % REANCHOR != 0 && t > 1e-250 {
                    t / (st * r)
                } else {
                    direct(j)
                };
                buf[j - jl] = t;
            }
            each(i, m, jl, &buf);
        }
    }

    /// `out[i] = ln sum_j exp(h_j + s_i y_j)` for ascending `s`.
    fn lse(&self, s: &[f64], out: &mut [f64]) {
        self.rows(s, |i, m, _, terms| {
            out[i] = m + terms.iter().sum::<f64>().ln();
        });
    }
}

/// Dual potentials on the supports of the two marginals, in cost units.
#[derive(Debug, Clone, PartialEq)]
pub struct Duals {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

/// Entropic plan `a_i b_j exp((f_i + g_j - c_ij) / eps)`.
#[derive(Debug, Clone)]
pub struct GibbsPlan {
    xs: Side,
    ys: Side,
    duals: Duals,
    eps: f64,
}

impl GibbsPlan {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn duals(&self) -> &Duals {
        &self.duals
    }

    /// Calls `f(i, j, mass, ln mass)` on grid indices for every entry inside
    /// the row windows.
    pub(crate) fn visit<F: FnMut(usize, usize, f64, f64)>(&self, mut f: F) {
        let (xs, ys, eps) = (&self.xs, &self.ys, self.eps);
        let h: Vec<f64> = (0..ys.len())
            .map(|j| (self.duals.g[j] - ys.pt(j).powi(2)) / eps + ys.lw[j])
            .collect();
        let s: Vec<f64> = (0..xs.len()).map(|i| 2.0 * xs.pt(i) / eps).collect();
        let env = Envelope::new(&h, ys.x0, ys.dx);
        env.rows(&s, |i, m, jl, terms| {
            let c = xs.lw[i] + (self.duals.f[i] - xs.pt(i).powi(2)) / eps;
            if !c.is_finite() {
                return;
            }
            let scale = (c + m).exp();
            for (off, &t) in terms.iter().enumerate() {
                if t > 0.0 {
                    let j = jl + off;
                    let lnp = c + env.val(j, s[i]);
                    f(xs.first + i, ys.first + j, scale * t, lnp);
                }
            }
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Stop once the L1 row-marginal error is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Adaptive over-relaxation of the dual updates.
    pub overrelax: bool,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 100_000, overrelax: true }
    }
}

/// Output of an entropic or constrained solve.
#[derive(Debug, Clone)]
pub struct SinkhornSolution {
    pub coupling: Coupling,
    /// Regularization used; zero for the unregularized monotone plan and
    /// infinite for the product plan.
    pub eps: f64,
    pub iterations: usize,
    pub marginal_err: f64,
    /// `E[(X - Y)^2]` under the coupling.
    pub w2_sq: f64,
    /// Information budget the solution was built for (the achieved MI for
    /// unconstrained solves).
    pub r_used: f64,
    pub converged: bool,
}

impl SinkhornSolution {
    pub fn mi(&self) -> f64 {
        self.coupling.mi()
    }

    pub fn duals(&self) -> Option<&Duals> {
        match self.coupling.plan() {
            Plan::Gibbs(g) => Some(g.duals()),
            _ => None,
        }
    }
}

/// Entropic OT between two grid laws with squared-distance cost.
pub fn sinkhorn_solve(p: &GridDensity, q: &GridDensity, eps: f64, tol: f64, max_iter: usize) -> Result<SinkhornSolution> {
    let opts = SinkhornOptions { tol, max_iter, ..SinkhornOptions::default() };
    sinkhorn_with(p, q, eps, &opts, None)
}

/// As [`sinkhorn_solve`], optionally warm-started from earlier duals.
pub fn sinkhorn_with(
    p: &GridDensity,
    q: &GridDensity,
    eps: f64,
    opts: &SinkhornOptions,
    warm: Option<&Duals>,
) -> Result<SinkhornSolution> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive and finite, got {eps}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {}", opts.tol)));
    }
    let xs = Side::new(p)?;
    let ys = Side::new(q)?;
    let (n, m) = (xs.len(), ys.len());
    let (mut f, mut g) = match warm {
        Some(d) if d.f.len() == n && d.g.len() == m => (d.f.clone(), d.g.clone()),
        _ => (vec![0.0; n], vec![0.0; m]),
    };
    let a: Vec<f64> = xs.lw.iter().map(|v| v.exp()).collect();
    let sx: Vec<f64> = (0..n).map(|i| 2.0 * xs.pt(i) / eps).collect();
    let sy: Vec<f64> = (0..m).map(|j| 2.0 * ys.pt(j) / eps).collect();
    let x2: Vec<f64> = (0..n).map(|i| xs.pt(i).powi(2)).collect();
    let y2: Vec<f64> = (0..m).map(|j| ys.pt(j).powi(2)).collect();

    let mut hy = vec![0.0; m];
    let mut hx = vec![0.0; n];
    let mut lam_x = vec![0.0; n];
    let mut lam_y = vec![0.0; m];

    let mut omega = 1.0;
    let mut locked = !opts.overrelax;
    let mut last_plain = true;
    let mut plain_errs: Vec<f64> = Vec::new();
    let mut best = f64::INFINITY;
    let mut err = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        for j in 0..m {
            hy[j] = (g[j] - y2[j]) / eps + ys.lw[j];
        }
        Envelope::new(&hy, ys.x0, ys.dx).lse(&sx, &mut lam_x);
        err = 0.0;
        for i in 0..n {
            let fnew = x2[i] - eps * lam_x[i];
            if a[i] > 0.0 {
                err += a[i] * (((f[i] - fnew) / eps).exp() - 1.0).abs();
            }
            lam_x[i] = fnew;
        }
        if !err.is_finite() && iterations > 1 {
            return Err(Error::NumericalFailure(format!("marginal error became {err} at eps = {eps}")));
        }
        if err < opts.tol && last_plain {
            converged = true;
            break;
        }
        if err < opts.tol || err > 10.0 * best {
            // Finish with plain steps, or recover from a relaxation overshoot.
            omega = 1.0;
            locked = true;
        }
        best = best.min(err);
        for i in 0..n {
            let fnew = lam_x[i];
            f[i] = if a[i] > 0.0 { f[i] + omega * (fnew - f[i]) } else { fnew };
        }
        for i in 0..n {
            hx[i] = (f[i] - x2[i]) / eps + xs.lw[i];
        }
        Envelope::new(&hx, xs.x0, xs.dx).lse(&sy, &mut lam_y);
        for j in 0..m {
            let gnew = y2[j] - eps * lam_y[j];
            g[j] = if ys.lw[j].is_finite() { g[j] + omega * (gnew - g[j]) } else { gnew };
        }
        last_plain = omega == 1.0;

        if !locked && omega == 1.0 && err.is_finite() {
            plain_errs.push(err);
            let k = plain_errs.len();
            if k >= 12 {
                let rate = (plain_errs[k - 1] / plain_errs[k - 5]).powf(0.25);
                if rate > 0.0 && rate < 1.0 {
                    omega = (2.0 / (1.0 + (1.0 - rate).sqrt())).min(1.9);
                    locked = omega <= 1.0;
                }
            }
        }
    }

    let plan = GibbsPlan { xs, ys, duals: Duals { f, g }, eps };
    let coupling = summarize_gibbs(p, q, plan)?;
    Ok(SinkhornSolution {
        w2_sq: coupling.cost(),
        r_used: coupling.mi(),
        coupling,
        eps,
        iterations,
        marginal_err: err,
        converged,
    })
}

fn summarize_gibbs(p: &GridDensity, q: &GridDensity, plan: GibbsPlan) -> Result<Coupling> {
    let mut row = vec![0.0; p.len()];
    let mut col = vec![0.0; q.len()];
    let mut cost = 0.0;
    let mut plogp = 0.0;
    plan.visit(|i, j, mass, lnp| {
        row[i] += mass;
        col[j] += mass;
        let d = p.point(i) - q.point(j);
        cost += mass * d * d;
        plogp += mass * lnp;
    });
    let total: f64 = row.iter().sum();
    if !total.is_finite() || (total - 1.0).abs() > 1e-3 {
        return Err(Error::NotNormalized { total });
    }
    let ent = |v: &[f64]| -> f64 { v.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum() };
    let mi = (plogp - ent(&row) - ent(&col)).max(0.0);
    Ok(Coupling::from_parts(p.clone(), q.clone(), Plan::Gibbs(plan), row, col, cost, mi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{discretize, DistSpec};
    use crate::info::mutual_information;
    use crate::transport::exact::w2_exact_1d;
    use approx::assert_relative_eq;

    fn gauss(mean: f64, var: f64, n: usize) -> GridDensity {
        discretize(&DistSpec::gaussian(mean, var).unwrap(), n, 1e-10).unwrap()
    }

    #[test]
    fn envelope_matches_brute_force_lse() {
        let h: Vec<f64> = (0..300)
            .map(|j| {
                let y = -3.0 + 0.02 * j as f64;
                if j == 17 || j == 150 {
                    f64::NEG_INFINITY
                } else {
                    -y * y * 3.0 + (j as f64 * 0.37).sin() * 5.0
                }
            })
            .collect();
        let s: Vec<f64> = (0..50).map(|i| -40.0 + 1.7 * i as f64).collect();
        let mut got = vec![0.0; s.len()];
        Envelope::new(&h, -3.0, 0.02).lse(&s, &mut got);
        for (i, &si) in s.iter().enumerate() {
            let terms: Vec<f64> = h.iter().enumerate().map(|(j, hj)| hj + si * (-3.0 + 0.02 * j as f64)).collect();
            let want = crate::numeric::log_sum_exp(&terms);
            assert_relative_eq!(got[i], want, epsilon = 1e-11, max_relative = 1e-13);
        }
    }

    #[test]
    fn large_eps_approaches_product() {
        let p = gauss(0.0, 1.0, 256);
        let q = gauss(1.0, 1.0, 256);
        let sol = sinkhorn_solve(&p, &q, 1e4, 1e-10, 1000).unwrap();
        assert!(sol.converged);
        assert!(sol.mi() < 1e-3);
        assert_relative_eq!(sol.w2_sq, 3.0, epsilon = 1e-2);
    }

    #[test]
    fn small_eps_recovers_exact_distance() {
        let p = gauss(0.0, 1.0, 512);
        let q = gauss(1.0, 1.0, 512);
        let sol = sinkhorn_solve(&p, &q, 1e-3, 1e-9, 100_000).unwrap();
        assert!(sol.converged, "err {}", sol.marginal_err);
        let exact = w2_exact_1d(&p, &q).powi(2);
        assert!((sol.w2_sq - exact).abs() < 1e-2);
        assert!((sol.w2_sq - 1.0).abs() < 1e-2);
    }

    #[test]
    fn identical_marginals_small_eps_is_near_diagonal() {
        let p = gauss(0.0, 1.0, 512);
        let sol = sinkhorn_solve(&p, &p, 1e-3, 1e-9, 100_000).unwrap();
        assert!(sol.w2_sq <= 1e-2);
        let (er, ec) = sol.coupling.marginal_errors();
        assert!(er < 1e-6 && ec < 1e-6);
    }

    #[test]
    fn cached_summaries_match_recomputation() {
        let p = gauss(0.0, 1.0, 128);
        let q = gauss(0.5, 2.0, 128);
        let sol = sinkhorn_solve(&p, &q, 0.3, 1e-11, 10_000).unwrap();
        let dense = Coupling::from_dense(p.clone(), q.clone(), sol.coupling.to_dense()).unwrap();
        assert_relative_eq!(dense.mi(), sol.mi(), epsilon = 1e-10);
        assert_relative_eq!(mutual_information(&sol.coupling).unwrap(), sol.mi(), epsilon = 1e-10);
        assert_relative_eq!(dense.cost(), sol.w2_sq, epsilon = 1e-10);
    }

    #[test]
    fn overrelaxation_agrees_with_plain() {
        let p = gauss(0.0, 1.0, 512);
        let q = gauss(0.0, 1.0, 512);
        let plain = SinkhornOptions { overrelax: false, ..SinkhornOptions::default() };
        let a = sinkhorn_with(&p, &q, 0.05, &plain, None).unwrap();
        let b = sinkhorn_with(&p, &q, 0.05, &SinkhornOptions::default(), None).unwrap();
        assert!(a.converged && b.converged);
        assert!(b.iterations < a.iterations);
        assert_relative_eq!(a.mi(), b.mi(), epsilon = 1e-8);
        assert_relative_eq!(a.w2_sq, b.w2_sq, epsilon = 1e-8);
    }

    #[test]
    fn rejects_bad_eps() {
        let p = gauss(0.0, 1.0, 64);
        assert!(sinkhorn_solve(&p, &p, 0.0, 1e-9, 10).is_err());
        assert!(sinkhorn_solve(&p, &p, f64::NAN, 1e-9, 10).is_err());
    }
}
