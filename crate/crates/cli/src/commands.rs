use std::io;

use entlab_core::bounds::{c_a, concentration_table, verify_scenario, BoundName, HalfLine, Scenario};
use entlab_core::deconv::{c_curve_with, DeconvOptions, Strategy};
use entlab_core::{DistSpec, Error, Potential};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{emit, num, Table};
use crate::verify::{run_suites, CheckResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Why a command stopped early.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => EXIT_USAGE,
            RunError::Numerical(_) | RunError::Io(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(_)
            | Error::InvalidArgument(_)
            | Error::UnsupportedSpec(_)
            | Error::OutOfRange { .. }
            | Error::ConstraintInfeasible { .. } => RunError::Usage(e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

/// Runs the configured command and returns its exit code.
pub fn run(cfg: &RunConfig) -> Result<i32, RunError> {
    use crate::config::CommandKind::*;
    match cfg.command {
        CCurve => cmd_c_curve(cfg),
        Bounds => cmd_bounds(cfg),
        Verify => cmd_verify(cfg),
        Concentration => cmd_concentration(cfg),
    }
}

fn spec(s: &Option<String>) -> Result<DistSpec, RunError> {
    Ok(s.as_deref().ok_or_else(|| RunError::Usage("missing distribution".into()))?.parse()?)
}

fn potential(cfg: &RunConfig) -> Result<Potential, RunError> {
    Ok(cfg.pot.as_deref().ok_or_else(|| RunError::Usage("missing --pot".into()))?.parse()?)
}

pub fn cmd_c_curve(cfg: &RunConfig) -> Result<i32, RunError> {
    let spec = spec(&cfg.dist)?;
    let rs = cfg.r.as_ref().map_or_else(|| crate::DEFAULT_C_GRID.parse().unwrap(), Clone::clone).values();
    let mut opts = DeconvOptions::default();
    if let Some(n) = cfg.grid_points {
        opts.grid = Some((n, spec.default_grid().1));
    }
    let pts = c_curve_with(&spec, &rs, cfg.strategy.unwrap_or(Strategy::Auto), &opts)?;
    let mut t = Table::new(["distribution", "strategy", "R", "C", "clipped_mass", "flags"]);
    for p in &pts {
        t.push(vec![p.distribution.clone(), p.strategy.clone(), num(p.r), num(p.c), num(p.clipped_mass), p.flags.join("|")]);
    }
    emit(cfg, &t, &pts)?;
    let failed = pts.iter().filter(|p| !p.c.is_finite()).count();
    if failed > 0 {
        eprintln!("{failed} of {} points failed; see the flags column", pts.len());
        return Ok(EXIT_NUMERICAL);
    }
    Ok(EXIT_OK)
}

pub fn cmd_bounds(cfg: &RunConfig) -> Result<i32, RunError> {
    let pot = potential(cfg)?;
    let y = spec(&cfg.py)?;
    let rs = cfg.r.as_ref().ok_or_else(|| RunError::Usage("bounds needs --r".into()))?.values();
    let mut s = Scenario::new("cli", pot, y, rs);
    if !cfg.which.is_empty() {
        s.bounds = cfg.which.clone();
    }
    s.tol = cfg.tolerances.get("scenario");
    if let Some(n) = cfg.grid_points {
        s.grid_points = n;
    }
    let rows = verify_scenario(&s)?;
    // Columns follow the requested order; bounds that do not apply are dropped.
    let shown: Vec<BoundName> = s.bounds.iter().copied().filter(|b| rows.iter().any(|r| r.report(*b).is_some())).collect();
    for b in s.bounds.iter().filter(|b| !shown.contains(b)) {
        eprintln!("note: {b} needs a standard Gaussian reference and was skipped");
    }
    let mut cols = vec!["R".to_string(), "w2_sq_half_lambda".to_string()];
    cols.extend(shown.iter().map(|b| format!("{b}_rhs")));
    cols.extend(shown.iter().map(|b| format!("{b}_slack")));
    cols.push("flags".into());
    let mut t = Table::new(cols);
    let mut violations = Vec::new();
    for row in &rows {
        let mut line = vec![num(row.r), num(row.w2_sq_half_lambda)];
        let mut flags = row.flags.clone();
        let reps: Vec<_> = shown.iter().map(|b| row.report(*b)).collect();
        line.extend(reps.iter().map(|r| r.map_or(String::new(), |r| num(r.rhs))));
        line.extend(reps.iter().map(|r| r.map_or(String::new(), |r| num(r.slack))));
        for rep in reps.into_iter().flatten() {
            flags.extend(rep.flags.iter().map(|f| format!("{}:{f}", rep.name)));
            if !rep.informational() && !rep.passes(s.tol) {
                violations.push(format!("{} at R = {} (slack {:.3e})", rep.name, row.r, rep.slack));
            }
        }
        line.push(flags.join("|"));
        t.push(line);
    }
    emit(cfg, &t, &rows)?;
    if !violations.is_empty() {
        eprintln!("bound violated beyond tolerance {}: {}", s.tol, violations.join("; "));
        return Ok(EXIT_VIOLATION);
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    passed: usize,
    failed: usize,
    seconds: f64,
    checks: &'a [CheckResult],
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<i32, RunError> {
    let t0 = std::time::Instant::now();
    let checks = run_suites(&cfg.only, &cfg.tolerances);
    let failed = checks.iter().filter(|c| !c.pass).count();
    let seconds = t0.elapsed().as_secs_f64();
    {
        let mut out = io::stdout().lock();
        use std::io::Write;
        for c in &checks {
            writeln!(out, "{} {}/{}: {} [{:.1}s]", if c.pass { "PASS" } else { "FAIL" }, c.suite, c.name, c.detail, c.seconds)?;
        }
        writeln!(out, "{} checks, {} failed, {:.1}s", checks.len(), failed, seconds)?;
    }
    if cfg.output.is_some() {
        let mut t = Table::new(["suite", "check", "pass", "detail", "seconds"]);
        for c in &checks {
            t.push(vec![c.suite.to_string(), c.name.clone(), c.pass.to_string(), c.detail.clone(), format!("{:.3}", c.seconds)]);
        }
        let report = VerifyReport { passed: checks.len() - failed, failed, seconds, checks: &checks };
        emit(cfg, &t, &report)?;
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VIOLATION })
}

pub fn cmd_concentration(cfg: &RunConfig) -> Result<i32, RunError> {
    let pot = potential(cfg)?;
    let a = cfg.a.unwrap_or_else(|| pot.mode());
    let c = cfg.c.unwrap_or(1.0);
    let rs = match &cfg.r {
        Some(g) => g.values(),
        None => {
            let ca = c_a(pot.lambda(), pot.cdf(a)?)?;
            let step = 0.5 / pot.lambda().sqrt();
            (0..8).map(|k| ca + step * k as f64).collect()
        }
    };
    let rows = concentration_table(&pot, HalfLine { a }, c, &rs, cfg.samples.unwrap_or(1_000_000), cfg.seed)?;
    let mut t = Table::new(["r", "c_a", "monte_carlo_mu_ar", "mc_stderr", "analytic_bound", "pass"]);
    for r in &rows {
        t.push(vec![num(r.r), num(r.c_a), num(r.monte_carlo_mu_ar), num(r.mc_stderr), num(r.analytic_bound), r.pass.to_string()]);
    }
    emit(cfg, &t, &rows)?;
    if rows.iter().any(|r| !r.pass) {
        eprintln!("Monte Carlo estimate above the bound by more than three standard errors");
        return Ok(EXIT_VIOLATION);
    }
    Ok(EXIT_OK)
}
