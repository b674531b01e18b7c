use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("potential cannot be normalized: {0}")]
    NonNormalizable(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("grids are not aligned (same origin, spacing and length required)")]
    GridMismatch,

    #[error("reference density vanishes where the first density has mass (x = {x})")]
    SupportMismatch { x: f64 },

    #[error("coupling has total mass {total}, expected 1")]
    NotNormalized { total: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("no closed form available for {0}")]
    UnsupportedSpec(String),

    #[error("deconvolved spectrum is not integrable: {0}")]
    NonIntegrableSpectrum(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("information budget R = {r} is infeasible for this strategy; smallest feasible R is {min_feasible_r}")]
    ConstraintInfeasible { r: f64, min_feasible_r: f64 },

    #[error("search failed: {0}")]
    SearchFailed(String),

    #[error("could not bracket the regularization strength for R = {target}; probes (eps, mi): {probes:?}")]
    BracketFailure { target: f64, probes: Vec<(f64, f64)> },

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("r = {r} is below c_A = {c_a}; the concentration bound only holds for r >= c_A")]
    OutOfRange { r: f64, c_a: f64 },

    #[error("rejection sampler exhausted after {attempts} proposals ({accepted} accepted)")]
    SamplerExhausted { attempts: u64, accepted: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
