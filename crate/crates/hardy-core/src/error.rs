//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("normal block A00 is numerically singular (min σ = {min_sigma:.3e}, scale = {scale:.3e})")]
    SingularNormalBlock { min_sigma: f64, scale: f64 },

    #[error("coefficients are not strictly accretive on the curl-free subspace (κ = {kappa:.3e})")]
    NotAccretive { kappa: f64 },

    #[error("symbol is undefined at the zero frequency")]
    ZeroFrequency,

    #[error("degenerate symbol: eigenvalue within {margin:.3e} of the imaginary axis")]
    DegenerateSymbol { margin: f64 },

    #[error("boundary trace map is numerically singular (cond = {cond:.3e})")]
    WellPosednessFailure { cond: f64 },

    #[error("boundary data must have zero mean (|mean| = {mean:.3e})")]
    ZeroMeanViolation { mean: f64 },

    #[error("nonzero eigenvalue on the imaginary axis (|Re λ| = {re:.3e}, scale = {scale:.3e})")]
    ImaginaryAxisEigenvalue { re: f64, scale: f64 },

    #[error("function is undefined on part of the spectrum (at λ = {at})")]
    UndefinedOnSpectrum { at: String },

    #[error("Neumann series does not converge (‖K‖ estimate = {norm:.3e})")]
    SeriesDiverges { norm: f64 },

    #[error("coefficients are not Hermitean (‖A − A*‖/‖A‖ = {rel:.3e})")]
    NotHermitean { rel: f64 },

    #[error("coefficients are not of block form (off-diagonal norm ratio = {rel:.3e})")]
    NotBlock { rel: f64 },

    #[error("discrete sesquilinear form is not coercive (pivot block {block} not positive definite)")]
    CoercivityFailure { block: usize },

    #[error("boundary data violates the {what} constraint (residual = {residual:.3e})")]
    ConstraintViolation { what: String, residual: f64 },

    #[error("multivector degree out of range (k = {k}, dimension = {n})")]
    DegreeOverflow { k: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
