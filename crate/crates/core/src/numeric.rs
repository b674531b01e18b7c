//! Small scalar numerics shared by the modules: adaptive quadrature and
//! bracketed root finding.

use crate::error::{Error, Result};

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

const MAX_PIECES: usize = 4000;

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// The piece with the largest error estimate is bisected until the summed
/// estimate drops below `max(abs_tol, rel_tol * |total|)`, or below what
/// rounding allows.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::QuadratureFailure(format!("non-finite interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let (sign, lo, hi) = if a < b { (1.0, a, b) } else { (-1.0, b, a) };
    let piece = |l: f64, r: f64| -> Result<Piece> {
        let (val, err) = gk15(&f, l, r);
        if !val.is_finite() {
            return Err(Error::QuadratureFailure(format!("integrand not finite on [{l}, {r}]")));
        }
        Ok(Piece { a: l, b: r, val, err })
    };
    let mut heap = std::collections::BinaryHeap::new();
    let first = piece(lo, hi)?;
    let (mut total, mut err, mut abs_sum) = (first.val, first.err, first.val.abs());
    heap.push(first);
    while heap.len() < MAX_PIECES {
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target || err <= 50.0 * f64::EPSILON * abs_sum {
            return Ok(sign * total);
        }
        let worst = heap.pop().expect("nonempty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(worst);
            break;
        }
        let (l, r) = (piece(worst.a, m)?, piece(m, worst.b)?);
        total += l.val + r.val - worst.val;
        err += l.err + r.err - worst.err;
        abs_sum += l.val.abs() + r.val.abs() - worst.val.abs();
        heap.push(l);
        heap.push(r);
    }
    // Re-sum to shed the drift of the running totals.
    let total: f64 = heap.iter().map(|p| p.val).sum();
    let err: f64 = heap.iter().map(|p| p.err).sum();
    if err <= 1e3 * abs_tol.max(rel_tol * total.abs()) {
        Ok(sign * total)
    } else {
        Err(Error::QuadratureFailure(format!(
            "error estimate {err:e} after {} pieces on [{lo}, {hi}]",
            heap.len()
        )))
    }
}

/// Bisection for a root of a function that changes sign on `[lo, hi]`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64, max_iter: usize) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::SearchFailed(format!(
            "no sign change on [{lo}, {hi}] (f = {flo}, {fhi})"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= x_tol {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `ln(sum(exp(v)))` over a slice, ignoring `-inf` entries.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_gaussian_kernel() {
        let v = integrate(|x| (-0.5 * x * x).exp(), -40.0, 40.0, 1e-15, 1e-14).unwrap();
        assert_relative_eq!(v, (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn integrates_kink() {
        let v = integrate(|x: f64| x.abs(), -1.0, 2.0, 1e-14, 1e-14).unwrap();
        assert_relative_eq!(v, 2.5, max_relative = 1e-12);
    }

    #[test]
    fn reversed_interval_flips_sign() {
        let v = integrate(|x| x, 1.0, 0.0, 1e-14, 1e-14).unwrap();
        assert_relative_eq!(v, -0.5, max_relative = 1e-14);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert_relative_eq!(r, 2f64.sqrt(), max_relative = 1e-13);
        assert!(bisect(|x| x * x + 1.0, 0.0, 1.0, 1e-12, 10).is_err());
    }

    #[test]
    fn lse_ignores_neg_infinity() {
        let v = log_sum_exp(&[0.0, f64::NEG_INFINITY, 0.0]);
        assert_relative_eq!(v, 2f64.ln(), max_relative = 1e-15);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
