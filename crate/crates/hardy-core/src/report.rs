//! Solve reports and norm diagnostics shared by the solver pipelines.

use serde::Serialize;

use crate::linalg::C;

/// Which boundary value problem is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BvpKind {
    Neu,
    Reg,
    Dir,
    NeuPerp,
}

impl BvpKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BvpKind::Neu => "neu",
            BvpKind::Reg => "reg",
            BvpKind::Dir => "dir",
            BvpKind::NeuPerp => "neuperp",
        }
    }
}

impl std::fmt::Display for BvpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The four solution norms of the Hardy splitting.
#[derive(Debug, Clone, Serialize)]
pub struct NormBundle {
    /// `‖f‖₂` of the boundary trace, in `L²(dx)` on the torus.
    pub trace_norm: f64,
    /// `sup_t ‖F_t‖₂`.
    pub sup_norm: f64,
    /// `(∫₀^∞ ‖t ∂_t F_t‖² dt/t)^{1/2}`.
    pub square_function: f64,
    /// `‖Ñ*(F)‖₂` with the windowed non-tangential maximal function;
    /// omitted where the windowed estimate is not part of the theory.
    pub ntmax: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    /// Relative residual of `∂_t F + T F = 0` over the sampled levels.
    pub pde: f64,
    /// Relative boundary-condition residual of the solved trace.
    pub boundary: f64,
    /// Rellich identity residual `|(f₀,(Af)₀) − ((Af)∥,f∥)|`, for
    /// Hermitean coefficients only.
    pub rellich: Option<f64>,
}

/// Result of a boundary value solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub which: BvpKind,
    pub n: usize,
    pub m: usize,
    pub grid_size: usize,
    /// Worst condition number of the restricted trace map.
    pub condition: f64,
    /// Worst data-to-trace solution-operator norm.
    pub solution_norm: f64,
    pub t_levels: Vec<f64>,
    /// Boundary trace samples, point-major with `(1+n)m` components.
    pub trace: Vec<C>,
    /// Field slices `F(t_j, ·)`, same layout as `trace`.
    pub slices: Vec<Vec<C>>,
    /// Potential slices `U(t_j, ·)` (`m` components per point) when the
    /// problem determines a potential.
    pub potential: Option<Vec<Vec<C>>>,
    /// `‖f₀‖/‖f∥‖` of the solved trace (the discrete Kato ratio for block
    /// coefficients).
    pub trace_component_ratio: f64,
    pub norms: NormBundle,
    pub residuals: Residuals,
}

/// JSON-friendly summary of a [`SolveReport`] (bulk field data is written to
/// CSV separately).
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub which: String,
    pub n: usize,
    pub m: usize,
    pub grid_size: usize,
    pub condition: f64,
    pub solution_norm: f64,
    pub t_levels: Vec<f64>,
    pub trace_component_ratio: f64,
    pub norms: NormBundle,
    pub residuals: Residuals,
}

impl SolveReport {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            which: self.which.to_string(),
            n: self.n,
            m: self.m,
            grid_size: self.grid_size,
            condition: self.condition,
            solution_norm: self.solution_norm,
            t_levels: self.t_levels.clone(),
            trace_component_ratio: self.trace_component_ratio,
            norms: self.norms.clone(),
            residuals: self.residuals.clone(),
        }
    }
}
