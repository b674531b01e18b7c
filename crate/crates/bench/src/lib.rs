//! Shared fixtures for the criterion benches.

use entlab_core::{discretize, DistSpec, GridDensity};

pub fn gaussian_grid(mean: f64, var: f64, n: usize) -> GridDensity {
    discretize(&DistSpec::gaussian(mean, var).unwrap(), n, 1e-10).unwrap()
}

pub fn mixture() -> DistSpec {
    DistSpec::mixture(vec![0.5, 0.5], vec![-2.0, 2.0], vec![1.0, 1.0]).unwrap()
}
