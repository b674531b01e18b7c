use entlab_core::bounds::{bolley_rhs, thm3_rhs, BoundName, BoundReport, PairStats};
use entlab_core::deconv::{c_term, Strategy as Split};
use entlab_core::info::{differential_entropy, discrete_entropy, entropy_power, kl_divergence, mutual_information};
use entlab_core::transport::{ConstrainedSolver, SinkhornOptions};
use entlab_core::{discretize, scale_density, DistSpec, Error, Potential};
use proptest::prelude::*;

fn gaussian() -> impl Strategy<Value = DistSpec> {
    (-2.0..2.0f64, 0.2..4.0f64).prop_map(|(m, v)| DistSpec::gaussian(m, v).unwrap())
}

fn mixture() -> impl Strategy<Value = DistSpec> {
    (0.1..0.9f64, -3.0..0.0f64, 0.0..3.0f64, 0.3..2.0f64, 0.3..2.0f64)
        .prop_map(|(w, m1, m2, v1, v2)| DistSpec::mixture(vec![w, 1.0 - w], vec![m1, m2], vec![v1, v2]).unwrap())
}

fn law() -> impl Strategy<Value = DistSpec> {
    prop_oneof![gaussian(), mixture()]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn spec_strings_round_trip(spec in law()) {
        let back: DistSpec = spec.to_string().parse().unwrap();
        prop_assert_eq!(back.to_string(), spec.to_string());
    }

    #[test]
    fn epi_holds_on_deconvolution_triples(spec in law(), r in 0.05..4.0f64, noise in any::<bool>()) {
        let strategy = if noise { Split::GaussianNoise } else { Split::ScaledCopy };
        match c_term(&spec, r, strategy) {
            Ok(res) if res.reliable() && res.h_y1.is_finite() => {
                let (sum, ny) = res.epi_sides();
                prop_assert!(sum <= ny * (1.0 + 1e-3), "N1 + N2 = {sum} > N(Y) = {ny}");
                prop_assert!((0.0..=1.0).contains(&res.c));
            }
            Ok(_) | Err(Error::ConstraintInfeasible { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn c_is_nondecreasing_in_r(spec in gaussian(), r1 in 0.05..3.0f64, dr in 0.01..2.0f64) {
        let a = c_term(&spec, r1, Split::ScaledCopy).unwrap().c;
        let b = c_term(&spec, r1 + dr, Split::ScaledCopy).unwrap().c;
        prop_assert!(a <= b + 1e-6, "C({r1}) = {a} > C({}) = {b}", r1 + dr);
    }

    #[test]
    fn entropy_scaling_law(spec in law(), t in 0.2..5.0f64) {
        let y = discretize(&spec, 2048, 1e-10).unwrap();
        let ty = scale_density(&y, t).unwrap();
        prop_assert!((differential_entropy(&ty) - differential_entropy(&y) - t.ln()).abs() < 1e-9);
        // Entropy power scales as t^2.
        let ratio = entropy_power(differential_entropy(&ty)) / entropy_power(differential_entropy(&y));
        prop_assert!((ratio - t * t).abs() < 1e-6 * t * t);
    }

    #[test]
    fn kl_is_nonnegative(a in law(), b in gaussian()) {
        let p = discretize(&a, 1024, 1e-10).unwrap();
        let q = entlab_core::discretize_on(&b, p.x0(), p.dx(), p.len()).unwrap();
        match kl_divergence(&p, &q) {
            Ok(d) => prop_assert!(d >= -1e-9, "KL = {d}"),
            Err(Error::SupportMismatch { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn bolley_below_kl_and_thm3_nests(spec in law(), lambda in 0.25..4.0f64, c in 0.0..1.0f64) {
        let pot = Potential::quadratic(lambda).unwrap();
        let y = discretize(&spec, 2048, 1e-10).unwrap();
        let stats = PairStats::new(&pot, &y).unwrap();
        let bolley = bolley_rhs(&pot, &y).unwrap();
        prop_assert!(bolley <= stats.kl + 1e-6);
        prop_assert!(thm3_rhs(&pot, &y, c).unwrap() >= bolley - 1e-12);
        prop_assert!((thm3_rhs(&pot, &y, 1.0).unwrap() - bolley).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn constrained_plans_respect_marginals_and_budget(a in law(), b in law(), r in 0.02..3.0f64) {
        let p = discretize(&a, 128, 1e-10).unwrap();
        let q = discretize(&b, 128, 1e-10).unwrap();
        let s = ConstrainedSolver::new(SinkhornOptions::default()).solve(&p, &q, r).unwrap();
        let (er, ec) = s.coupling.marginal_errors();
        prop_assert!(er <= 1e-6 && ec <= 1e-6, "marginal errors {er} {ec}");
        prop_assert!(s.mi() <= r + 1e-4, "mi {} > R {r}", s.mi());
        let mi = mutual_information(&s.coupling).unwrap();
        let cap = discrete_entropy(&p.weights()).min(discrete_entropy(&q.weights()));
        prop_assert!(mi <= cap + 1e-12);
    }

    #[test]
    fn w2_is_nonincreasing_in_budget(a in law(), b in law(), r1 in 0.02..2.0f64, dr in 0.05..2.0f64) {
        let p = discretize(&a, 128, 1e-10).unwrap();
        let q = discretize(&b, 128, 1e-10).unwrap();
        let mut solver = ConstrainedSolver::new(SinkhornOptions::default());
        let lo = solver.solve(&p, &q, r1).unwrap().w2_sq;
        let hi = solver.solve(&p, &q, r1 + dr).unwrap().w2_sq;
        prop_assert!(hi <= lo + 1e-4, "W2^2({}) = {hi} > W2^2({r1}) = {lo}", r1 + dr);
    }
}

#[test]
fn bound_report_json_shape() {
    let pot = Potential::quadratic(1.0).unwrap();
    let y = discretize(&DistSpec::gaussian(1.0, 1.0).unwrap(), 1024, 1e-10).unwrap();
    let stats = PairStats::new(&pot, &y).unwrap();
    let rep = BoundReport::new(BoundName::Bolley, Some(20.0), 0.5, stats.dimensional(1.0), Default::default());
    let v = serde_json::to_value(&rep).unwrap();
    for key in ["name", "R", "lhs", "rhs", "slack", "inputs", "flags"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["name"], "bolley");
}
