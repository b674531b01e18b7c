use crate::error::Result;
use crate::grid::GridDensity;

use super::coupling::Coupling;

/// `W_2` between two grid laws, integrating the squared gap between their
/// piecewise-linear quantile functions exactly over merged breakpoints.
pub fn w2_exact_1d(p: &GridDensity, q: &GridDensity) -> f64 {
    let (up, qp) = quantile_knots_exact(p);
    let (uq, qq) = quantile_knots_exact(q);
    let (mut a, mut b) = (0usize, 0usize);
    let mut u0 = 0.0;
    let mut acc = 0.0;
    while a + 1 < up.len() && b + 1 < uq.len() {
        let u1 = up[a + 1].min(uq[b + 1]);
        if u1 > u0 {
            let d0 = seg(&up, &qp, a, u0) - seg(&uq, &qq, b, u0);
            let d1 = seg(&up, &qp, a, u1) - seg(&uq, &qq, b, u1);
            acc += (u1 - u0) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
        }
        u0 = u1;
        if up[a + 1] <= u1 {
            a += 1;
        }
        if uq[b + 1] <= u1 {
            b += 1;
        }
    }
    acc.max(0.0).sqrt()
}

/// Knots as `(u_k, left_k, right_k)` per positive cell: on `[u_k, u_{k+1}]`
/// the quantile rises linearly from the cell's left edge to its right edge.
fn quantile_knots_exact(d: &GridDensity) -> (Vec<f64>, Vec<(f64, f64)>) {
    let total = d.mass();
    let mut u = vec![0.0];
    let mut cells = Vec::new();
    let mut acc = 0.0;
    for (i, &p) in d.values().iter().enumerate() {
        if p > 0.0 {
            acc += p * d.dx() / total;
            u.push(acc.min(1.0));
            let c = d.point(i);
            cells.push((c - 0.5 * d.dx(), c + 0.5 * d.dx()));
        }
    }
    if let Some(last) = u.last_mut() {
        *last = 1.0;
    }
    (u, cells)
}

fn seg(u: &[f64], cells: &[(f64, f64)], k: usize, t: f64) -> f64 {
    let (u0, u1) = (u[k], u[k + 1]);
    let (l, r) = cells[k];
    if u1 > u0 {
        l + (r - l) * ((t - u0) / (u1 - u0)).clamp(0.0, 1.0)
    } else {
        l
    }
}

/// The north-west-corner (comonotone) coupling of the two point-mass
/// marginals: the exact discrete optimum for any convex cost of `x - y`.
pub fn monotone_coupling(p: &GridDensity, q: &GridDensity) -> Result<Coupling> {
    let a = p.weights();
    let b = q.weights();
    let mut entries = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ra, mut rb) = (a[0], b[0]);
    loop {
        let m = ra.min(rb);
        if m > 0.0 {
            entries.push((i, j, m));
        }
        ra -= m;
        rb -= m;
        let a_done = ra <= 1e-18;
        let b_done = rb <= 1e-18;
        if a_done {
            i += 1;
            if i == a.len() {
                break;
            }
            ra = a[i];
        }
        if b_done {
            j += 1;
            if j == b.len() {
                break;
            }
            rb = b[j];
        }
    }
    // Residual rounding mass lands on the last cells.
    let placed: f64 = entries.iter().map(|e| e.2).sum();
    if placed < 1.0 {
        entries.push((a.len() - 1, b.len() - 1, 1.0 - placed));
    }
    Coupling::from_entries(p.clone(), q.clone(), entries)
}
