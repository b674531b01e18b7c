//! One PASS/FAIL line per acceptance criterion. Tolerances are fixed here.

use std::process::Command;
use std::time::Instant;

use entlab_core::bounds::{catalogue, verify_scenario, BoundName, Scenario, ScenarioRow};
use entlab_core::deconv::{c_closed_form, c_term, Strategy};
use entlab_core::transport::{gaussian_sinkhorn_oracle, sinkhorn_constrained};
use entlab_core::{discretize, DistSpec};

const BIN: &str = env!("CARGO_BIN_EXE_entlab");

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Runs the binary; returns (exit code, stdout, stderr).
fn entlab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().expect("run entlab");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Data rows of a CSV table as column-name lookups.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let k = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

fn closed_form_sweep(spec: &DistSpec, tol: f64, budget_s: f64) -> Verdict {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for r in linspace(0.05, 5.0, 20) {
        match (c_term(spec, r, Strategy::ScaledCopy), c_closed_form(spec, r)) {
            (Ok(res), Ok(c)) => worst = worst.max((res.c - c).abs()),
            (Err(e), _) | (_, Err(e)) => return verdict(false, format!("R = {r}: {e}")),
        }
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(worst <= tol && secs < budget_s, format!("max error {worst:.2e} (tol {tol:.0e}), {secs:.1}s"))
}

fn c1() -> Verdict {
    closed_form_sweep(&DistSpec::gaussian(0.0, 1.0).unwrap(), 1e-3, 10.0)
}

fn c2() -> Verdict {
    closed_form_sweep(&DistSpec::cauchy(0.0, 1.0).unwrap(), 1e-2, 10.0)
}

fn c3() -> Verdict {
    let t = Instant::now();
    let p = discretize(&DistSpec::gaussian(0.0, 1.0).unwrap(), 4096, 1e-10).unwrap();
    let mut worst: f64 = 0.0;
    for r in [0.1, 0.5, 1.0, 2.0] {
        match sinkhorn_constrained(&p, &p, r, 1e-9) {
            Ok(s) => worst = worst.max((s.w2_sq - gaussian_sinkhorn_oracle(1.0, 1.0, 0.0, r)).abs()),
            Err(e) => return verdict(false, format!("R = {r}: {e}")),
        }
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(worst <= 5e-3 && secs < 60.0, format!("max error {worst:.2e} (tol 5e-3), {secs:.1}s"))
}

fn rhs(row: &ScenarioRow, b: BoundName) -> f64 {
    row.report(b).map_or(f64::NAN, |r| r.rhs)
}

fn c4(cat: &[(Scenario, Vec<ScenarioRow>)]) -> Verdict {
    let rows = &cat.iter().find(|(s, _)| s.name == "isotropic-gaussian").unwrap().1;
    let worst = rows.iter().map(|r| r.report(BoundName::Thm3).map_or(f64::INFINITY, |x| x.slack.abs())).fold(0.0, f64::max);
    verdict(worst <= 5e-3, format!("max |thm3 slack| {worst:.2e} over {} budgets (tol 5e-3)", rows.len()))
}

fn c5(cat: &[(Scenario, Vec<ScenarioRow>)]) -> Verdict {
    let (mut nest, mut order): (f64, f64) = (0.0, f64::NEG_INFINITY);
    for (_, rows) in cat {
        for row in rows {
            order = order.max(rhs(row, BoundName::Bolley) - rhs(row, BoundName::ClassicalTalagrand));
        }
        let last = rows.iter().find(|r| r.r == 20.0).unwrap();
        nest = nest.max((rhs(last, BoundName::Thm3) - rhs(last, BoundName::Bolley)).abs());
    }
    verdict(
        nest <= 1e-6 && order <= 1e-6,
        format!("|thm3(20) - bolley| {nest:.2e}, max (bolley - KL) {order:.2e} (tol 1e-6)"),
    )
}

fn c6(cat: &[(Scenario, Vec<ScenarioRow>)]) -> Verdict {
    let rows = &cat.iter().find(|(s, _)| s.name == "isotropic-gaussian").unwrap().1;
    let (mut gap, mut eps): (f64, f64) = (0.0, 0.0);
    for row in rows {
        gap = gap.max((2.0 * rhs(row, BoundName::Thm4) - rhs(row, BoundName::BaiSinkhorn)).abs());
        eps = eps.max(row.report(BoundName::Thm4).and_then(|r| r.inputs.eps_term).map_or(f64::INFINITY, f64::abs));
    }
    verdict(gap <= 1e-3 && eps <= 1e-4, format!("max |2 thm4 - bai| {gap:.2e} (tol 1e-3), max |eps| {eps:.2e} (tol 1e-4)"))
}

fn c7() -> Verdict {
    let t = Instant::now();
    let (code, out, err) =
        entlab(&["bounds", "--pot", "potential:fig2", "--py", "gaussian:mean=0,var=0.04", "--r", "0.05:4:40", "--which", "thm3"]);
    let secs = t.elapsed().as_secs_f64();
    if code != 0 {
        return verdict(false, format!("exit {code}: {err}"));
    }
    let (h, rows) = csv_rows(&out);
    let dist = column(&h, &rows, "w2_sq_half_lambda");
    let bound = column(&h, &rows, "thm3_rhs");
    let above = dist.iter().zip(&bound).all(|(d, b)| b >= d);
    let pass = rows.len() == 40 && above && nonincreasing(&dist) && nonincreasing(&bound) && secs < 300.0;
    verdict(
        pass,
        format!(
            "{} rows, bound >= distance: {above}, distance {:.4}..{:.4}, bound {:.4}..{:.4}, {secs:.0}s",
            rows.len(),
            dist[0],
            dist[dist.len() - 1],
            bound[0],
            bound[bound.len() - 1]
        ),
    )
}

fn c8() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;
    for (dist, strategy, tol) in [
        ("gaussian:mean=0,var=1", "scaled-copy", Some(1e-3)),
        ("cauchy:x0=0,gamma=1", "scaled-copy", Some(1e-2)),
        ("mixture:w=0.5;0.5,mean=-2;2,var=1;1", "gaussian-noise", None),
    ] {
        let (code, out, err) = entlab(&["c-curve", "--dist", dist, "--r", "0:5:50", "--strategy", strategy]);
        if code != 0 {
            return verdict(false, format!("{dist}: exit {code}: {err}"));
        }
        let (h, rows) = csv_rows(&out);
        let rs = column(&h, &rows, "R");
        let cs = column(&h, &rows, "C");
        let monotone = cs.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        let shape = cs[0] == 0.0 && *cs.last().unwrap() >= 0.95 && cs.iter().all(|c| (0.0..=1.0).contains(c));
        let overlay = match tol {
            Some(tol) => {
                let spec: DistSpec = dist.parse().unwrap();
                let worst = rs.iter().zip(&cs).map(|(r, c)| (c - c_closed_form(&spec, *r).unwrap()).abs()).fold(0.0, f64::max);
                notes.push(format!("{} overlay {worst:.1e}", &dist[..dist.find(':').unwrap()]));
                worst <= tol
            }
            None => true,
        };
        pass &= monotone && shape && overlay;
        notes.push(format!("C(5) = {:.4}", cs.last().unwrap()));
    }
    verdict(pass, notes.join(", "))
}

fn c9() -> Verdict {
    let t = Instant::now();
    let mut notes = Vec::new();
    for (pot, c) in [("potential:quadratic,lambda=1", "0.8660254037844386"), ("potential:fig2", "1")] {
        let (code, out, err) = entlab(&["concentration", "--pot", pot, "--c", c, "--samples", "1000000", "--seed", "11"]);
        if code != 0 {
            return verdict(false, format!("{pot}: exit {code}: {err}"));
        }
        let (h, rows) = csv_rows(&out);
        let mc = column(&h, &rows, "monte_carlo_mu_ar");
        let se = column(&h, &rows, "mc_stderr");
        let bound = column(&h, &rows, "analytic_bound");
        let ok = mc.iter().zip(&se).zip(&bound).all(|((m, s), b)| *m <= b + 3.0 * s);
        if !ok {
            return verdict(false, format!("{pot}: Monte Carlo above bound + 3 se"));
        }
        notes.push(format!("{pot}: {} r values ok", rows.len()));
    }
    let secs = t.elapsed().as_secs_f64();
    notes.push(format!("{secs:.1}s"));
    verdict(secs < 60.0, notes.join(", "))
}

fn c10() -> Verdict {
    let t = Instant::now();
    let (code, out, _) = entlab(&["verify"]);
    let secs = t.elapsed().as_secs_f64();
    let summary = out.lines().last().unwrap_or("").to_string();
    verdict(code == 0 && secs < 300.0, format!("exit {code}, {summary}"))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, what: &str, v: Verdict| {
        println!("{} criterion {n}: {what}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed += 1;
        }
    };
    report(1, "Gaussian C closed form", c1());
    report(2, "Cauchy C closed form", c2());
    report(3, "Gaussian Sinkhorn oracle", c3());
    let cat: Vec<(Scenario, Vec<ScenarioRow>)> = catalogue()
        .unwrap()
        .into_iter()
        .map(|s| {
            let rows = verify_scenario(&s).unwrap_or_else(|e| panic!("scenario {}: {e}", s.name));
            (s, rows)
        })
        .collect();
    report(4, "isotropic equality case", c4(&cat));
    report(5, "Bolley nesting and ordering", c5(&cat));
    report(6, "Gaussian-reference recovery", c6(&cat));
    report(7, "fig2 curves", c7());
    report(8, "C curves", c8());
    report(9, "concentration", c9());
    report(10, "property suites via verify", c10());
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
