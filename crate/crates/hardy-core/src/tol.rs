//! Centralized numeric thresholds.
//!
//! Tolerances that gate behaviour (error vs. proceed) live here so that every
//! module and the acceptance suite agree on the same numbers.

/// Relative floor on the smallest singular value of a normal block `A00`
/// before the hat transform refuses to invert it.
pub const SINGULAR_A00_REL: f64 = 1e-12;

/// Relative tolerance deciding the classification flags (Hermitean, block,
/// constant) of a coefficient field.
pub const CLASSIFY_REL: f64 = 1e-12;

/// A nonzero eigenvalue of `T_A` closer than this (relative to ‖T‖) to the
/// imaginary axis is reported as a bisectoriality failure.
pub const IMAG_AXIS_REL: f64 = 1e-10;

/// Eigenvalues of magnitude below this (relative to ‖T‖) are assigned to the
/// null spectral projection.
pub const NULL_EIG_REL: f64 = 1e-10;

/// Symbol projections fall back from eigenvectors to a matrix-sign iteration
/// when the eigenvector matrix condition number exceeds this.
pub const EIGVEC_COND_FALLBACK: f64 = 1e8;

/// Quadratic functionals are integrated analytically in eigencoordinates when
/// the eigenvector condition number is below this, otherwise by quadrature.
pub const EIGVEC_COND_ANALYTIC: f64 = 1e6;

/// A restricted boundary trace map with 2-norm condition number above this is
/// declared numerically singular (well-posedness failure).
pub const WP_COND_LIMIT: f64 = 1e10;

/// Neumann series refuses to iterate when the estimated ‖K‖ is above this.
pub const NEUMANN_SERIES_LIMIT: f64 = 1.0 - 1e-6;

/// Threshold below which the series path is preferred over a direct solve.
pub const NEUMANN_PREFERRED: f64 = 0.9;

/// Window constants of the non-tangential maximal function
/// `Q(t,x) = [(1-C0)t, (1+C0)t] × B(x; C1 t)`.
pub const NTMAX_C0: f64 = 0.5;
pub const NTMAX_C1: f64 = 1.0;

/// Default number of points on the logarithmic t-grid used for norm
/// quadratures.
pub const T_GRID_POINTS: usize = 200;

/// Default number of unit directions sampled by well-posedness scans.
pub const WP_SCAN_DIRECTIONS: usize = 512;
