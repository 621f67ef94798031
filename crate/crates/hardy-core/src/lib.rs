//! Spectral machinery for boundary value problems of divergence-form elliptic
//! systems on the half space, with complex, t-independent coefficients.
//!
//! The second order system `div A(x) grad U = 0` on the upper half space is
//! rewritten as the first order system `∂_t F + T_A F = 0` for the gradient
//! field `F`, where `T_A = Ābar⁻¹ D A̲` is built from the splitting of the
//! coefficient matrix into normal/tangential blocks.  Everything is
//! discretized on a band-limited torus, so `D`, multiplication by `A`, and
//! hence `T_A` are finite complex matrices and all the algebraic identities of
//! the continuum theory hold to rounding accuracy.
//!
//! Crate layout:
//!
//! - [`coefficients`] — coefficient fields `A(x)`, the triangular factors
//!   `Ābar`/`A̲`, the hat transform `Â = A̲ Ābar⁻¹`, and accretivity
//!   diagnostics.
//! - [`lattice`] — frequency lattices and unitary FFT helpers.
//! - [`symbol`] — per-frequency (constant coefficient) machinery: symbols
//!   `D_ξ`, `T_ξ`, Hardy symbol projections, well-posedness scans, and the
//!   full FFT solve pipeline.
//! - [`calculus`] — dense variable-coefficient engine for a 1-torus boundary:
//!   `T_A` as a matrix, its eigendecomposition-backed functional calculus
//!   (`sgn`, `χ±`, `e^{-t|T|}`), quadratic functionals and solution norms.
//! - [`bvp`] — boundary value solves through restricted trace maps on the
//!   upper Hardy subspace, the double-layer/Neumann-series path, Rellich
//!   diagnostics, and an independent variational (Lax–Milgram) oracle.
//! - [`forms`] — exterior algebra layer: multivectors, wedge/interior
//!   products, and constant-coefficient symbol solves for k-form systems.
//! - [`sampling`] — seeded generators for random accretive test coefficients.

pub mod bvp;
pub mod calculus;
pub mod coefficients;
pub mod error;
pub mod forms;
pub mod lattice;
pub mod linalg;
pub mod report;
pub mod sampling;
pub mod symbol;
pub mod tol;

pub use error::{CoreError, Result};
pub use linalg::C;
