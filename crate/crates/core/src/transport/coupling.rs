use crate::error::{Error, Result};
use crate::grid::GridDensity;
use crate::info::discrete_entropy;

use super::sinkhorn::GibbsPlan;

/// How the joint masses are stored.
#[derive(Debug, Clone)]
pub enum Plan {
    /// Row-major `n x m` matrix of point masses.
    Dense(Vec<f64>),
    /// Explicit `(i, j, mass)` entries, e.g. the monotone rearrangement.
    Sparse(Vec<(usize, usize, f64)>),
    /// The independent coupling of the two marginals.
    Product,
    /// `a_i b_j exp((f_i + g_j - c_ij) / eps)`, evaluated on demand.
    Gibbs(GibbsPlan),
}

/// A joint law on the product of two grids, with cached summaries.
///
/// Masses are point masses: they sum to one over all `(i, j)`.
#[derive(Debug, Clone)]
pub struct Coupling {
    grid_x: GridDensity,
    grid_y: GridDensity,
    plan: Plan,
    row: Vec<f64>,
    col: Vec<f64>,
    cost: f64,
    mi: f64,
}

impl Coupling {
    /// Builds a coupling from a dense matrix, checking normalization.
    pub fn from_dense(grid_x: GridDensity, grid_y: GridDensity, m: Vec<f64>) -> Result<Self> {
        let (n, k) = (grid_x.len(), grid_y.len());
        if m.len() != n * k {
            return Err(Error::InvalidArgument(format!("matrix has {} entries, expected {}", m.len(), n * k)));
        }
        if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite("coupling entries must be finite and nonnegative".into()));
        }
        Self::summarize(grid_x, grid_y, Plan::Dense(m))
    }

    /// Builds a coupling from explicit entries.
    pub fn from_entries(grid_x: GridDensity, grid_y: GridDensity, e: Vec<(usize, usize, f64)>) -> Result<Self> {
        if e.iter().any(|&(i, j, v)| i >= grid_x.len() || j >= grid_y.len() || !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("coupling entry out of range or negative".into()));
        }
        Self::summarize(grid_x, grid_y, Plan::Sparse(e))
    }

    /// The independent coupling; its mutual information is zero exactly.
    pub fn product(grid_x: GridDensity, grid_y: GridDensity) -> Self {
        let row = grid_x.weights();
        let col = grid_y.weights();
        let ex = grid_x.mean();
        let ey = grid_y.mean();
        let cost = grid_x.second_moment() - 2.0 * ex * ey + grid_y.second_moment();
        Self { grid_x, grid_y, plan: Plan::Product, row, col, cost, mi: 0.0 }
    }

    pub(crate) fn from_parts(
        grid_x: GridDensity,
        grid_y: GridDensity,
        plan: Plan,
        row: Vec<f64>,
        col: Vec<f64>,
        cost: f64,
        mi: f64,
    ) -> Self {
        Self { grid_x, grid_y, plan, row, col, cost, mi }
    }

    fn summarize(grid_x: GridDensity, grid_y: GridDensity, plan: Plan) -> Result<Self> {
        let mut c = Self { grid_x, grid_y, plan, row: Vec::new(), col: Vec::new(), cost: 0.0, mi: 0.0 };
        let mut row = vec![0.0; c.grid_x.len()];
        let mut col = vec![0.0; c.grid_y.len()];
        let mut cost = 0.0;
        let mut plogp = 0.0;
        c.for_each_entry(|i, j, p| {
            row[i] += p;
            col[j] += p;
            let d = c.grid_x.point(i) - c.grid_y.point(j);
            cost += p * d * d;
            if p > 0.0 {
                plogp += p * p.ln();
            }
        });
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized { total });
        }
        c.mi = (plogp + discrete_entropy(&row) + discrete_entropy(&col)).max(0.0);
        c.row = row;
        c.col = col;
        c.cost = cost;
        Ok(c)
    }

    pub fn grid_x(&self) -> &GridDensity {
        &self.grid_x
    }

    pub fn grid_y(&self) -> &GridDensity {
        &self.grid_y
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    /// `E_P[(X - Y)^2]`.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// Cached mutual information in nats.
    pub fn mi(&self) -> f64 {
        self.mi
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row
    }

    pub fn col_sums(&self) -> &[f64] {
        &self.col
    }

    pub fn total_mass(&self) -> f64 {
        self.row.iter().sum()
    }

    /// L1 distances of the row and column sums from the two input marginals.
    pub fn marginal_errors(&self) -> (f64, f64) {
        let l1 = |s: &[f64], d: &GridDensity| s.iter().zip(d.values()).map(|(a, b)| (a - b * d.dx()).abs()).sum();
        (l1(&self.row, &self.grid_x), l1(&self.col, &self.grid_y))
    }

    /// Calls `f(i, j, mass)` for every stored entry (entries below the Gibbs
    /// window cut are skipped).
    pub fn for_each_entry<F: FnMut(usize, usize, f64)>(&self, mut f: F) {
        match &self.plan {
            Plan::Dense(m) => {
                let k = self.grid_y.len();
                for (idx, &v) in m.iter().enumerate() {
                    f(idx / k, idx % k, v);
                }
            }
            Plan::Sparse(e) => e.iter().for_each(|&(i, j, v)| f(i, j, v)),
            Plan::Product => {
                let (a, b) = (self.grid_x.weights(), self.grid_y.weights());
                for (i, &ai) in a.iter().enumerate() {
                    for (j, &bj) in b.iter().enumerate() {
                        f(i, j, ai * bj);
                    }
                }
            }
            Plan::Gibbs(g) => g.visit(|i, j, p, _| f(i, j, p)),
        }
    }

    /// Dense row-major copy, for small grids and inspection.
    pub fn to_dense(&self) -> Vec<f64> {
        let k = self.grid_y.len();
        let mut m = vec![0.0; self.grid_x.len() * k];
        self.for_each_entry(|i, j, p| m[i * k + j] += p);
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::mutual_information;
    use approx::assert_relative_eq;

    fn atoms(k: usize) -> GridDensity {
        GridDensity::from_values(0.0, 1.0, vec![1.0; k]).unwrap()
    }

    #[test]
    fn product_has_zero_information() {
        let x = GridDensity::from_values(0.0, 0.5, vec![1.0, 2.0, 3.0]).unwrap();
        let y = GridDensity::from_values(-1.0, 0.25, vec![4.0, 1.0]).unwrap();
        let c = Coupling::product(x.clone(), y.clone());
        assert_eq!(c.mi(), 0.0);
        assert!(mutual_information(&c).unwrap().abs() < 1e-12);
        let dense = Coupling::from_dense(x, y, c.to_dense()).unwrap();
        assert!(dense.mi().abs() < 1e-12);
        assert_relative_eq!(dense.cost(), c.cost(), epsilon = 1e-12);
    }

    #[test]
    fn diagonal_coupling_on_four_atoms() {
        let mut m = vec![0.0; 16];
        for i in 0..4 {
            m[i * 5] = 0.25;
        }
        let c = Coupling::from_dense(atoms(4), atoms(4), m).unwrap();
        assert_relative_eq!(c.mi(), 4f64.ln(), epsilon = 1e-10);
        assert_relative_eq!(mutual_information(&c).unwrap(), 4f64.ln(), epsilon = 1e-10);
        assert_eq!(c.cost(), 0.0);
    }

    #[test]
    fn two_by_two_brute_force() {
        let m = vec![0.4, 0.1, 0.1, 0.4];
        let c = Coupling::from_dense(atoms(2), atoms(2), m.clone()).unwrap();
        let brute: f64 = m.iter().map(|p| p * (p / 0.25).ln()).sum();
        assert_relative_eq!(c.mi(), brute, epsilon = 1e-12);
        assert_relative_eq!(brute, 0.192_744_757, epsilon = 1e-9);
    }

    #[test]
    fn rejects_unnormalized() {
        let r = Coupling::from_dense(atoms(2), atoms(2), vec![0.5, 0.5, 0.5, 0.5]);
        assert!(matches!(r, Err(Error::NotNormalized { .. })));
    }
}
