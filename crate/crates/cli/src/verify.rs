use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use entlab_core::bounds::{
    c_a, catalogue, concentration_bound, concentration_table, verify_scenario, BoundName, HalfLine, PairStats, Scenario,
    ScenarioRow,
};
use entlab_core::deconv::{c_closed_form, c_curve, c_term, DeconvResult, Strategy};
use entlab_core::info::{differential_entropy, discrete_entropy, kl_identity_check, mutual_information, stam_defect};
use entlab_core::transport::{gaussian_sinkhorn_oracle, monotone_coupling, w2_exact_1d, ConstrainedSolver, SinkhornOptions};
use entlab_core::{discretize, scale_density, DistSpec, Error, GridDensity, Potential};
use serde::Serialize;

use crate::config::{ConfigError, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Dist,
    Info,
    Deconvolution,
    Transport,
    Bounds,
    Concentration,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Dist, Suite::Info, Suite::Deconvolution, Suite::Transport, Suite::Bounds, Suite::Concentration];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Dist => "dist",
            Suite::Info => "info",
            Suite::Deconvolution => "deconvolution",
            Suite::Transport => "transport",
            Suite::Bounds => "bounds",
            Suite::Concentration => "concentration",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
            ConfigError(format!("unknown suite '{s}' (known: {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub suite: Suite,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

type Outcome = Result<(bool, String), Error>;

struct Runner<'a> {
    suite: Suite,
    out: &'a mut Vec<CheckResult>,
}

impl Runner<'_> {
    fn check<F: FnOnce() -> Outcome>(&mut self, name: &str, f: F) {
        let t = Instant::now();
        let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        self.out.push(CheckResult {
            suite: self.suite,
            name: name.to_string(),
            pass,
            detail,
            seconds: t.elapsed().as_secs_f64(),
        });
    }
}

/// Runs the selected suites (all when `only` is empty) in a fixed order.
pub fn run_suites(only: &[Suite], tol: &Tolerances) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for suite in Suite::ALL {
        if !only.is_empty() && !only.contains(&suite) {
            continue;
        }
        let mut r = Runner { suite, out: &mut out };
        match suite {
            Suite::Dist => dist_suite(&mut r, tol),
            Suite::Info => info_suite(&mut r, tol),
            Suite::Deconvolution => deconvolution_suite(&mut r, tol),
            Suite::Transport => transport_suite(&mut r, tol),
            Suite::Bounds => bounds_suite(&mut r, tol),
            Suite::Concentration => concentration_suite(&mut r),
        }
    }
    out
}

fn within(what: &str, err: f64, tol: f64) -> (bool, String) {
    (err <= tol, format!("{what} {err:.3e} (tol {tol:.1e})"))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn gauss(mean: f64, var: f64, n: usize) -> Result<GridDensity, Error> {
    discretize(&DistSpec::gaussian(mean, var)?, n, 1e-10)
}

fn laws() -> Result<Vec<DistSpec>, Error> {
    Ok(vec![
        DistSpec::gaussian(0.0, 1.0)?,
        DistSpec::gaussian(2.0, 0.25)?,
        DistSpec::cauchy(0.0, 1.0)?,
        DistSpec::mixture(vec![0.5, 0.5], vec![-2.0, 2.0], vec![1.0, 1.0])?,
        DistSpec::PotentialDefined(Potential::quadratic(1.0)?),
        DistSpec::PotentialDefined(Potential::quadratic_soft_abs()?),
    ])
}

fn dist_suite(r: &mut Runner, tol: &Tolerances) {
    r.check("gaussian-entropy", || {
        let mut worst: f64 = 0.0;
        for (m, v) in [(0.0, 1.0), (2.0, 0.25), (0.0, 0.04)] {
            let spec = DistSpec::gaussian(m, v)?;
            let h = differential_entropy(&spec.discretize_default()?);
            worst = worst.max((h - spec.entropy().unwrap()).abs());
        }
        Ok(within("max |h_grid - h|", worst, tol.get("entropy")))
    });
    r.check("cauchy-entropy", || {
        let spec = DistSpec::cauchy(0.0, 1.0)?;
        let h = differential_entropy(&spec.discretize_default()?);
        Ok(within("|h_grid - ln(4 pi)|", (h - spec.entropy().unwrap()).abs(), tol.get("cauchy_c")))
    });
    r.check("unit-mass", || {
        let mut worst: f64 = 0.0;
        for spec in laws()? {
            worst = worst.max((spec.discretize_default()?.mass() - 1.0).abs());
        }
        Ok(within("max |mass - 1|", worst, 1e-9))
    });
    r.check("spec-round-trip", || {
        for spec in laws()? {
            let back: DistSpec = spec.to_string().parse()?;
            if back.to_string() != spec.to_string() {
                return Ok((false, format!("{spec} came back as {back}")));
            }
        }
        Ok((true, "all specs round-trip".into()))
    });
    r.check("mixture-moments", || {
        let d = laws()?[3].discretize_default()?;
        let err = d.mean().abs().max((d.variance() - 5.0).abs());
        Ok(within("max moment error", err, tol.get("entropy")))
    });
}

fn info_suite(r: &mut Runner, tol: &Tolerances) {
    r.check("kl-nonnegative", || {
        let mut least = f64::INFINITY;
        for s in catalogue()? {
            let y = discretize(&s.y, 2048, 1e-10)?;
            least = least.min(PairStats::new(&s.pot, &y)?.kl);
        }
        Ok((least >= -tol.get("ordering"), format!("min KL {least:.3e}")))
    });
    r.check("kl-identity", || {
        let mut worst: f64 = 0.0;
        for s in catalogue()? {
            let y = discretize(&s.y, 2048, 1e-10)?;
            worst = worst.max(kl_identity_check(&s.pot, &y)?.gap());
        }
        Ok(within("max |D - (E V - h)|", worst, tol.get("entropy")))
    });
    r.check("entropy-scaling", || {
        let mut worst: f64 = 0.0;
        for spec in [DistSpec::gaussian(0.0, 1.0)?, DistSpec::mixture(vec![0.3, 0.7], vec![-1.0, 2.0], vec![0.5, 1.0])?] {
            let y = spec.discretize_default()?;
            for t in [0.5, 2.0, 3.0] {
                let ty = scale_density(&y, t)?;
                worst = worst.max((differential_entropy(&ty) - differential_entropy(&y) - t.ln()).abs());
            }
        }
        Ok(within("max |h(tY) - h(Y) - ln t|", worst, tol.get("entropy")))
    });
    r.check("stam", || {
        let g = stam_defect(&gauss(0.0, 1.0, 4096)?)?;
        let m = stam_defect(&laws()?[3].discretize_default()?)?;
        let pass = (g - 1.0).abs() <= tol.get("entropy") && m >= 1.0 - tol.get("entropy");
        Ok((pass, format!("N J = {g:.6} (gaussian), {m:.6} (mixture)")))
    });
    r.check("mi-below-marginal-entropies", || {
        let p = gauss(0.0, 1.0, 256)?;
        let q = discretize(&laws()?[3], 256, 1e-10)?;
        let mut solver = ConstrainedSolver::new(SinkhornOptions::default());
        for budget in [0.5, 2.0, 20.0] {
            let s = solver.solve(&p, &q, budget)?;
            let mi = mutual_information(&s.coupling)?;
            let cap = discrete_entropy(&p.weights()).min(discrete_entropy(&q.weights()));
            if mi > cap + 1e-12 || (mi - s.mi()).abs() > 1e-9 {
                return Ok((false, format!("R = {budget}: mi {mi} vs min H {cap}, reported {}", s.mi())));
            }
        }
        Ok((true, "I(X;Y) <= min(H(X), H(Y)) on all plans".into()))
    });
}

fn deconvolution_suite(r: &mut Runner, tol: &Tolerances) {
    let rs = linspace(0.05, 5.0, 20);
    let gaussian = DistSpec::gaussian(0.0, 1.0).unwrap();
    let cauchy = DistSpec::cauchy(0.0, 1.0).unwrap();
    let mixture = DistSpec::mixture(vec![0.5, 0.5], vec![-2.0, 2.0], vec![1.0, 1.0]).unwrap();
    let mut triples: Vec<(String, DeconvResult)> = Vec::new();

    let closed = |r: &mut Runner, name: &str, spec: &DistSpec, key: &str, triples: &mut Vec<(String, DeconvResult)>| {
        r.check(name, || {
            let mut worst: f64 = 0.0;
            for &b in &rs {
                let res = c_term(spec, b, Strategy::ScaledCopy)?;
                worst = worst.max((res.c - c_closed_form(spec, b)?).abs());
                triples.push((format!("{spec} R={b}"), res));
            }
            Ok(within("max |C - closed form|", worst, tol.get(key)))
        });
    };
    closed(r, "gaussian-closed-form", &gaussian, "gaussian_c", &mut triples);
    closed(r, "cauchy-closed-form", &cauchy, "cauchy_c", &mut triples);
    r.check("mixture-gaussian-noise", || {
        let mut used = 0;
        for &b in &rs {
            match c_term(&mixture, b, Strategy::GaussianNoise) {
                Ok(res) => {
                    used += 1;
                    triples.push((format!("{mixture} R={b}"), res));
                }
                Err(Error::ConstraintInfeasible { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok((used > 0, format!("{used} of {} budgets feasible", rs.len())))
    });
    r.check("epi-forward", || {
        let mut worst = f64::NEG_INFINITY;
        let mut at = String::new();
        for (label, res) in &triples {
            if !res.h_y1.is_finite() || !res.reliable() {
                continue;
            }
            let (sum, ny) = res.epi_sides();
            let rel = (sum - ny) / ny;
            if rel > worst {
                worst = rel;
                at = label.clone();
            }
        }
        let (pass, d) = within("max (N1 + N2 - N(Y)) / N(Y)", worst.max(0.0), tol.get("epi"));
        Ok((pass, format!("{d} over {} triples, worst at {at}", triples.len())))
    });

    let mut curve_rs = vec![0.0];
    curve_rs.extend(&rs);
    for (name, spec, strategy) in [
        ("gaussian", &gaussian, Strategy::ScaledCopy),
        ("cauchy", &cauchy, Strategy::ScaledCopy),
        ("mixture", &mixture, Strategy::GaussianNoise),
    ] {
        r.check(&format!("{name}-curve-shape"), || {
            let pts = c_curve(spec, &curve_rs, strategy)?;
            let cs: Vec<f64> = pts.iter().map(|p| p.c).collect();
            if cs.iter().any(|c| !c.is_finite() || !(0.0..=1.0).contains(c)) {
                return Ok((false, format!("C outside [0, 1]: {cs:?}")));
            }
            let drop = cs.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
            let (first, last) = (cs[0], *cs.last().unwrap());
            let pass = drop <= tol.get("monotone") && first == 0.0 && last >= 0.95;
            Ok((pass, format!("C(0) = {first}, C(5) = {last:.5}, largest drop {drop:.2e}")))
        });
    }
}

fn transport_suite(r: &mut Runner, tol: &Tolerances) {
    r.check("gaussian-oracle", || {
        let p = gauss(0.0, 1.0, 1024)?;
        let mut solver = ConstrainedSolver::new(SinkhornOptions::default());
        let mut worst: f64 = 0.0;
        for b in [0.1, 0.5, 1.0, 2.0] {
            let s = solver.solve(&p, &p, b)?;
            worst = worst.max((s.w2_sq - gaussian_sinkhorn_oracle(1.0, 1.0, 0.0, b)).abs());
        }
        Ok(within("max |W2^2 - 2 + 2 sqrt(1 - e^-2R)|", worst, tol.get("oracle_w2")))
    });

    let pairs = || -> Result<Vec<(&'static str, GridDensity, GridDensity)>, Error> {
        Ok(vec![
            ("gaussian-pair", gauss(0.0, 1.0, 512)?, gauss(0.5, 2.0, 512)?),
            (
                "fig2-pair",
                discretize(&DistSpec::PotentialDefined(Potential::quadratic_soft_abs()?), 512, 1e-10)?,
                gauss(0.0, 0.04, 512)?,
            ),
            ("mixture-pair", gauss(0.0, 1.0, 512)?, discretize(&laws()?[3], 512, 1e-10)?),
        ])
    };
    let budgets = [0.0, 0.05, 0.2, 0.5, 1.0, 2.0, 4.0, 20.0];
    let mut sweeps: Vec<(&str, f64, f64, f64, f64)> = Vec::new(); // (pair, R, w2, mi, marginal)
    r.check("sweeps", || {
        for (name, p, q) in pairs()? {
            let mut solver = ConstrainedSolver::new(SinkhornOptions::default());
            for &b in &budgets {
                let s = solver.solve(&p, &q, b)?;
                let (er, ec) = s.coupling.marginal_errors();
                sweeps.push((name, b, s.w2_sq, s.mi(), er.max(ec)));
            }
        }
        Ok((true, format!("{} constrained solves", sweeps.len())))
    });
    r.check("marginals", || {
        let worst = sweeps.iter().map(|s| s.4).fold(0.0, f64::max);
        Ok(within("max marginal L1 error", worst, tol.get("marginal")))
    });
    r.check("mi-budget", || {
        let worst = sweeps.iter().map(|s| s.3 - s.1).fold(f64::NEG_INFINITY, f64::max);
        Ok(within("max (mi - R)", worst.max(0.0), tol.get("mi")))
    });
    r.check("w2-monotone", || {
        let mut worst: f64 = 0.0;
        for w in sweeps.windows(2) {
            if w[0].0 == w[1].0 {
                worst = worst.max(w[1].2 - w[0].2);
            }
        }
        Ok(within("largest rise of W2^2(R)", worst, tol.get("monotone")))
    });
    r.check("exact-w2-vs-monotone-plan", || {
        let mut worst: f64 = 0.0;
        for (_, p, q) in pairs()? {
            let e = w2_exact_1d(&p, &q);
            let c = monotone_coupling(&p, &q)?.cost();
            worst = worst.max((e * e - c).abs() / c.max(1e-12));
        }
        Ok(within("max relative gap", worst, 1e-2))
    });
}

fn scenario_rows() -> Result<Vec<(Scenario, Vec<ScenarioRow>)>, Error> {
    catalogue()?.into_iter().map(|s| verify_scenario(&s).map(|rows| (s, rows))).collect()
}

fn rhs(row: &ScenarioRow, b: BoundName) -> Result<f64, Error> {
    row.report(b).map(|r| r.rhs).ok_or_else(|| Error::InvalidArgument(format!("no {b} report at R = {}", row.r)))
}

fn bounds_suite(r: &mut Runner, tol: &Tolerances) {
    let mut all = Vec::new();
    r.check("catalogue", || {
        all = scenario_rows()?;
        Ok((true, format!("{} scenarios evaluated", all.len())))
    });
    if all.is_empty() {
        return;
    }
    let stol = tol.get("scenario");
    for (s, rows) in &all {
        r.check(&format!("{}-slack", s.name), || {
            let mut least = f64::INFINITY;
            let mut failed = Vec::new();
            for row in rows {
                for rep in row.reports.iter().filter(|x| !x.informational()) {
                    least = least.min(rep.slack);
                    if !rep.passes(stol) {
                        failed.push(format!("{}@R={}", rep.name, row.r));
                    }
                }
            }
            let detail = format!("min slack {least:.3e} (tol {stol:.1e})");
            Ok((failed.is_empty(), if failed.is_empty() { detail } else { format!("{detail}; failing: {}", failed.join(" ")) }))
        });
    }
    let find = |name: &str| all.iter().find(|(s, _)| s.name == name);
    r.check("bolley-below-kl", || {
        let mut worst = f64::NEG_INFINITY;
        for (_, rows) in &all {
            for row in rows {
                worst = worst.max(rhs(row, BoundName::Bolley)? - rhs(row, BoundName::ClassicalTalagrand)?);
            }
        }
        Ok(within("max (bolley - KL)", worst.max(0.0), tol.get("ordering")))
    });
    r.check("thm3-nesting", || {
        let (mut at20, mut rise): (f64, f64) = (0.0, 0.0);
        for (_, rows) in &all {
            for w in rows.windows(2) {
                rise = rise.max(rhs(&w[1], BoundName::Thm3)? - rhs(&w[0], BoundName::Thm3)?);
            }
            if let Some(row) = rows.iter().find(|x| x.r == 20.0) {
                at20 = at20.max((rhs(row, BoundName::Thm3)? - rhs(row, BoundName::Bolley)?).abs());
            }
        }
        let pass = at20 <= tol.get("ordering") && rise <= tol.get("monotone");
        Ok((pass, format!("|thm3 - bolley| at R=20 {at20:.3e}, largest rise {rise:.3e}")))
    });
    r.check("isotropic-equality", || {
        let (_, rows) = find("isotropic-gaussian").ok_or_else(|| Error::InvalidArgument("missing scenario".into()))?;
        let mut worst: f64 = 0.0;
        for row in rows {
            worst = worst.max(row.report(BoundName::Thm3).map_or(f64::INFINITY, |x| x.slack.abs()));
        }
        Ok(within("max |thm3 slack|", worst, stol))
    });
    r.check("mean-shift-tightness", || {
        let (_, rows) = find("mean-shift").ok_or_else(|| Error::InvalidArgument("missing scenario".into()))?;
        let row = rows.iter().find(|x| x.r == 20.0).ok_or_else(|| Error::InvalidArgument("no R = 20 row".into()))?;
        let worst = [BoundName::Bolley, BoundName::ClassicalTalagrand]
            .iter()
            .map(|b| row.report(*b).map_or(f64::INFINITY, |x| x.slack.abs()))
            .fold(0.0, f64::max);
        Ok(within("max |slack| of bolley and classical", worst, stol))
    });
    r.check("closed-form-consistency", || {
        let pot = Potential::quadratic(1.0)?;
        let mut worst: f64 = 0.0;
        for spec in [DistSpec::gaussian(0.0, 1.0)?, DistSpec::gaussian(0.0, 4.0)?, DistSpec::gaussian(1.0, 0.5)?] {
            let stats = PairStats::new(&pot, &spec.discretize_default()?)?;
            for b in [0.1, 0.5, 1.0, 3.0] {
                let exact = c_closed_form(&spec, b)?;
                for st in [Strategy::ScaledCopy, Strategy::GaussianNoise] {
                    let num = c_term(&spec, b, st)?.c;
                    worst = worst.max((stats.dimensional(num) - stats.dimensional(exact)).abs());
                }
            }
        }
        Ok(within("max |thm3(C numeric) - thm3(C closed)|", worst, tol.get("consistency")))
    });
    r.check("thm4-recovers-bai", || {
        let (_, rows) = find("isotropic-gaussian").ok_or_else(|| Error::InvalidArgument("missing scenario".into()))?;
        let (mut gap, mut eps): (f64, f64) = (0.0, 0.0);
        for row in rows {
            gap = gap.max((2.0 * rhs(row, BoundName::Thm4)? - rhs(row, BoundName::BaiSinkhorn)?).abs());
            let e = row.report(BoundName::Thm4).and_then(|x| x.inputs.eps_term).unwrap_or(f64::INFINITY);
            eps = eps.max(e.abs());
        }
        let pass = gap <= tol.get("recovery") && eps <= tol.get("epsilon");
        Ok((pass, format!("max |2 thm4 - bai| {gap:.3e}, max |eps| {eps:.3e}")))
    });
    r.check("fig2-curves", || {
        let (_, rows) = find("fig2-potential").ok_or_else(|| Error::InvalidArgument("missing scenario".into()))?;
        let mut rise: f64 = 0.0;
        let mut below = 0;
        for w in rows.windows(2) {
            rise = rise.max(w[1].w2_sq_half_lambda - w[0].w2_sq_half_lambda);
            rise = rise.max(rhs(&w[1], BoundName::Thm3)? - rhs(&w[0], BoundName::Thm3)?);
        }
        for row in rows {
            if rhs(row, BoundName::Thm3)? < row.w2_sq_half_lambda {
                below += 1;
            }
        }
        let pass = below == 0 && rise <= tol.get("monotone");
        Ok((pass, format!("{below} rows with bound below distance, largest rise {rise:.3e}")))
    });
}

fn concentration_suite(r: &mut Runner) {
    r.check("edge-value", || {
        let c = 0.75f64.sqrt();
        let ca = c_a(1.0, 0.5)?;
        let b = concentration_bound(1.0, c, 0.5, ca)?;
        Ok(within("|bound(c_A) - 1/C|", (b - 1.0 / c).abs(), 1e-12))
    });
    for (name, pot, c) in [
        ("gaussian", Potential::quadratic(1.0), 0.75f64.sqrt()),
        ("fig2", Potential::quadratic_soft_abs(), 1.0),
    ] {
        r.check(&format!("{name}-monte-carlo"), || {
            let pot = pot?;
            let ca = c_a(pot.lambda(), pot.cdf(0.0)?)?;
            let step = 0.5 / pot.lambda().sqrt();
            let rs: Vec<f64> = (0..8).map(|k| ca + step * k as f64).collect();
            let rows = concentration_table(&pot, HalfLine { a: 0.0 }, c, &rs, 1_000_000, 7)?;
            let fails = rows.iter().filter(|x| !x.pass).count();
            let worst = rows.iter().map(|x| x.monte_carlo_mu_ar - x.analytic_bound).fold(f64::NEG_INFINITY, f64::max);
            Ok((fails == 0, format!("{fails} of {} rows above bound + 3 se, max (mc - bound) {worst:.3e}", rows.len())))
        });
    }
}
