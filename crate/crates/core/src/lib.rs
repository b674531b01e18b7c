// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::manual_is_multiple_of)]

pub mod bounds;
pub mod deconv;
pub mod dist;
pub mod error;
pub mod grid;
pub mod info;
pub mod numeric;
pub mod potential;
pub mod spectral;
pub mod transport;

pub use dist::{discretize, discretize_on, DistSpec};
pub use error::{Error, Result};
pub use grid::{scale_density, GridDensity};
pub use potential::{expected_potential, Potential, PotentialKind};
