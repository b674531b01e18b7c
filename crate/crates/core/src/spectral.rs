//! Characteristic functions of grid densities and the inverse transform.
//!
//! Frequencies follow the DFT layout: index `k` carries
//! `w_k = 2 pi k' / (n dx)` with `k' = k` for `k < n/2` and `k - n` otherwise.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::GridDensity;

pub fn signed_index(k: usize, n: usize) -> f64 {
    if k < n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Angular frequencies of the DFT layout.
pub fn frequencies(n: usize, dx: f64) -> Vec<f64> {
    let base = 2.0 * PI / (n as f64 * dx);
    (0..n).map(|k| base * signed_index(k, n)).collect()
}

/// `phi(w_k) = E[exp(i w_k X)]` for the grid law, via one FFT.
pub fn grid_cf(d: &GridDensity) -> Vec<Complex64> {
    let n = d.len();
    let mut buf: Vec<Complex64> = d.values().iter().map(|&p| Complex64::new(p, 0.0)).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let w = frequencies(n, d.dx());
    buf.iter()
        .zip(&w)
        .map(|(v, &wk)| v * d.dx() * Complex64::cis(wk * d.x0()))
        .collect()
}

/// `phi(t w_k)` for the grid law on the same frequency layout.
///
/// The sum `sum_j p_j exp(2 pi i t j k / n)` is a chirp-z transform,
/// evaluated with Bluestein's identity `jk = (j^2 + k^2 - (k - j)^2) / 2`.
pub fn grid_cf_scaled(d: &GridDensity, t: f64) -> Vec<Complex64> {
    let n = d.len();
    let half = n / 2;
    let m = (2 * n).next_power_of_two();
    let a = PI * t / n as f64;
    let chirp = |j: f64| Complex64::cis(a * j * j);

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);

    let mut u = vec![Complex64::new(0.0, 0.0); m];
    for (j, &p) in d.values().iter().enumerate() {
        u[j] = p * chirp(j as f64);
    }
    // Kernel conj(chirp(l)) for l in -(n-1)..=half, wrapped modulo m.
    let mut v = vec![Complex64::new(0.0, 0.0); m];
    for l in 0..=half.max(n - 1) {
        let c = chirp(l as f64).conj();
        if l <= half {
            v[l] = c;
        }
        if l >= 1 && l < n {
            v[m - l] = c;
        }
    }
    fwd.process(&mut u);
    fwd.process(&mut v);
    for (x, y) in u.iter_mut().zip(&v) {
        *x *= y;
    }
    inv.process(&mut u);
    let scale = 1.0 / m as f64;

    let w = frequencies(n, d.dx());
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..=half {
        let s = u[k] * scale * chirp(k as f64) * d.dx();
        out[k] = s * Complex64::cis(t * w[k].abs() * d.x0());
    }
    // phi(-w) = conj(phi(w)) for real laws.
    for k in half + 1..n {
        out[k] = out[n - k].conj();
    }
    // The Nyquist bin is assigned to -w by the layout.
    out[half] = out[half].conj();
    out
}

/// Inverts a spectrum sampled on the DFT layout back to density values on the
/// grid `x0 + j dx`. Returns the real part.
pub fn inverse_to_grid(spectrum: &[Complex64], x0: f64, dx: f64) -> Vec<f64> {
    let n = spectrum.len();
    let w = frequencies(n, dx);
    let mut buf: Vec<Complex64> = spectrum
        .iter()
        .zip(&w)
        .map(|(s, &wk)| s * Complex64::cis(-wk * x0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / (n as f64 * dx);
    buf.iter().map(|v| v.re * scale).collect()
}

/// Density of `X + Y` for independent grid laws sharing the spacing.
pub fn convolve(a: &GridDensity, b: &GridDensity) -> Result<GridDensity> {
    if ((a.dx() - b.dx()) / a.dx()).abs() > 1e-9 {
        return Err(Error::GridMismatch);
    }
    let len = a.len() + b.len() - 1;
    let m = len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let pad = |d: &GridDensity| {
        let mut v = vec![Complex64::new(0.0, 0.0); m];
        for (slot, &p) in v.iter_mut().zip(d.values()) {
            slot.re = p;
        }
        v
    };
    let mut u = pad(a);
    let mut v = pad(b);
    fwd.process(&mut u);
    fwd.process(&mut v);
    for (x, y) in u.iter_mut().zip(&v) {
        *x *= y;
    }
    inv.process(&mut u);
    let scale = a.dx() / m as f64;
    let p = u[..len].iter().map(|z| (z.re * scale).max(0.0)).collect();
    GridDensity::from_values(a.x0() + b.x0(), a.dx(), p)
}

/// Sum of absolute differences times `dx` between two aligned-spacing laws,
/// after embedding both on their common lattice span.
pub fn l1_distance(a: &GridDensity, b: &GridDensity) -> Result<f64> {
    if ((a.dx() - b.dx()) / a.dx()).abs() > 1e-9 {
        return Err(Error::GridMismatch);
    }
    let dx = a.dx();
    let x0 = a.x0().min(b.x0());
    let hi = a.x_last().max(b.x_last());
    let n = ((hi - x0) / dx).round() as usize + 1;
    let ea = a.embed(x0, n)?;
    let eb = b.embed(x0, n)?;
    Ok(ea.values().iter().zip(eb.values()).map(|(p, q)| (p - q).abs()).sum::<f64>() * dx)
}
