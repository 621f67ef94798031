//! Dense variable-coefficient engine on the 1-torus boundary.
//!
//! For n = 1 the curl-free constraint is vacuous, so the infinitesimal
//! generator `T_A = Ābar⁻¹ D A̲` is assembled as a dense complex matrix on
//! truncated Fourier coefficients (frequency-major, `2m` components per
//! frequency) and its functional calculus is carried by a full
//! eigendecomposition: spectral projections onto the upper/lower half planes
//! and the null part, `sgn`, `χ±`, the decay semigroup `e^{-t|T|}`, quadratic
//! functionals and the four solution norms.

use faer::{Col, Mat};

use crate::coefficients::{self, CoefficientField};
use crate::error::{CoreError, Result};
use crate::lattice::FrequencyLattice;
use crate::linalg::{self, adjoint, cr, eigh, identity, inverse_refined, opnorm, scale, C, ZERO};
use crate::report::NormBundle;
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    /// The self-adjoint first order operator `D`.
    DOperator,
    /// A multiplication operator (frequency-space convolution).
    Multiplication,
    /// The infinitesimal generator `T_A`.
    Generator,
    Derived,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub m: usize,
    pub lattice: FrequencyLattice,
    pub mat: Mat<C>,
    pub kind: OpKind,
}

impl DiscreteOperator {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }
}

fn require_n1(lattice: &FrequencyLattice) -> Result<()> {
    if lattice.n != 1 {
        return Err(CoreError::InvalidInput(
            "the dense engine handles a one-dimensional boundary only".into(),
        ));
    }
    Ok(())
}

/// The operator `D = [0 ∂ₓ; -∂ₓ... ]` on the frequency basis: block diagonal
/// with Hermitian blocks `[0, iξ I_m; -iξ I_m, 0]`.
pub fn assemble_d(lattice: &FrequencyLattice, m: usize) -> Result<DiscreteOperator> {
    require_n1(lattice)?;
    let p = lattice.num_points();
    let dim = 2 * m;
    let mat = Mat::from_fn(p * dim, p * dim, |r, c| {
        let (kr, ir) = (r / dim, r % dim);
        let (kc, ic) = (c / dim, c % dim);
        if kr != kc {
            return ZERO;
        }
        let xi = lattice.freq(kr)[0] as f64;
        if ir < m && ic == ir + m {
            C::new(0.0, xi)
        } else if ir >= m && ic == ir - m {
            C::new(0.0, -xi)
        } else {
            ZERO
        }
    });
    Ok(DiscreteOperator {
        m,
        lattice: lattice.clone(),
        mat,
        kind: OpKind::DOperator,
    })
}

/// Accretivity gate: smallest eigenvalue of the Hermitian part of the
/// multiplication operator compressed to the curl-free subspace.
pub fn check_accretive(field: &CoefficientField, lattice: &FrequencyLattice) -> Result<f64> {
    let ma = coefficients::multiplication_operator(field, lattice);
    let herm = scale(cr(0.5), &(&ma + &adjoint(&ma)));
    let basis = coefficients::curl_free_basis(field.n, field.m, lattice, true);
    let hc = &(&adjoint(&basis) * &herm) * &basis;
    let (vals, _) = eigh(&hc);
    if vals[0] <= 0.0 {
        return Err(CoreError::NotAccretive { kappa: vals[0] });
    }
    Ok(vals[0])
}

/// The infinitesimal generator `T_A = Ābar⁻¹ D A̲` as a dense matrix.
pub fn assemble_ta(field: &CoefficientField, lattice: &FrequencyLattice) -> Result<DiscreteOperator> {
    require_n1(lattice)?;
    if field.n != 1 {
        return Err(CoreError::InvalidInput(
            "variable-coefficient generators need n = 1 coefficients".into(),
        ));
    }
    check_accretive(field, lattice)?;
    let factors = field.split_triangular()?;
    let m = field.m;
    let dim = 2 * m;
    // Ābar⁻¹ sample-wise: inverting a multiplication operator is sample-wise
    // inversion.
    let upper_inv: Vec<Mat<C>> = factors.upper.iter().map(inverse_refined).collect();
    let m_upper_inv = coefficients::mult_operator_from_samples(&upper_inv, dim, lattice);
    let m_lower = coefficients::mult_operator_from_samples(&factors.lower, dim, lattice);
    let d = assemble_d(lattice, m)?;
    let mat = &(&m_upper_inv * &d.mat) * &m_lower;
    Ok(DiscreteOperator {
        m,
        lattice: lattice.clone(),
        mat,
        kind: OpKind::Generator,
    })
}

/// Residual of the similarity `T_A = Ābar⁻¹ (D Â) Ābar`, relative to `‖T_A‖`.
pub fn similarity_residual(
    field: &CoefficientField,
    lattice: &FrequencyLattice,
    ta: &DiscreteOperator,
) -> Result<f64> {
    let factors = field.split_triangular()?;
    let dim = 2 * field.m;
    let m_upper = coefficients::mult_operator_from_samples(&factors.upper, dim, lattice);
    let upper_inv: Vec<Mat<C>> = factors.upper.iter().map(inverse_refined).collect();
    let m_upper_inv = coefficients::mult_operator_from_samples(&upper_inv, dim, lattice);
    let ahat = field.hat_transform()?;
    let m_hat = coefficients::multiplication_operator(&ahat, lattice);
    let d = assemble_d(lattice, field.m)?;
    let rhs = &(&m_upper_inv * &(&d.mat * &m_hat)) * &m_upper;
    Ok(opnorm(&(&ta.mat - &rhs)) / opnorm(&ta.mat))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralClass {
    Plus,
    Minus,
    Null,
}

/// Eigendecomposition-backed functional calculus handle for `T_A`.
pub struct HardyFrame {
    pub m: usize,
    pub lattice: FrequencyLattice,
    pub values: Vec<C>,
    pub class: Vec<SpectralClass>,
    pub vectors: Mat<C>,
    pub vectors_inv: Mat<C>,
    /// Condition number of the eigenvector matrix.
    pub vcond: f64,
    /// Largest |arg λ| (folded onto the right half plane) over nonzero
    /// eigenvalues.
    pub omega_observed: f64,
    norm_t: f64,
    mat: Mat<C>,
    sign_cell: once_cell::sync::OnceCell<Mat<C>>,
}

pub fn hardy_frame(op: &DiscreteOperator) -> Result<HardyFrame> {
    let e = linalg::eig(&op.mat);
    let norm_t = opnorm(&op.mat);
    let mut class = Vec::with_capacity(e.values.len());
    let mut omega: f64 = 0.0;
    for l in &e.values {
        if l.abs() < tol::NULL_EIG_REL * norm_t {
            class.push(SpectralClass::Null);
            continue;
        }
        if l.re.abs() < tol::IMAG_AXIS_REL * norm_t {
            return Err(CoreError::ImaginaryAxisEigenvalue {
                re: l.re.abs(),
                scale: norm_t,
            });
        }
        let folded = if l.re > 0.0 { *l } else { -*l };
        omega = omega.max(folded.arg().abs());
        class.push(if l.re > 0.0 {
            SpectralClass::Plus
        } else {
            SpectralClass::Minus
        });
    }
    Ok(HardyFrame {
        m: op.m,
        lattice: op.lattice.clone(),
        values: e.values,
        class,
        vectors: e.vectors,
        vectors_inv: e.vectors_inv,
        vcond: e.vcond,
        omega_observed: omega,
        norm_t,
        mat: op.mat.clone(),
        sign_cell: once_cell::sync::OnceCell::new(),
    })
}

impl HardyFrame {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm_t(&self) -> f64 {
        self.norm_t
    }

    /// `b(T)` with the convention `b ≡ 0` on the null spectral part.
    pub fn functional_calculus(&self, b: impl Fn(C) -> C) -> Result<Mat<C>> {
        let dim = self.dim();
        let mut diag = vec![ZERO; dim];
        for i in 0..dim {
            if self.class[i] == SpectralClass::Null {
                continue;
            }
            let v = b(self.values[i]);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(CoreError::UndefinedOnSpectrum {
                    at: format!("{:.6e}+{:.6e}i", self.values[i].re, self.values[i].im),
                });
            }
            diag[i] = v;
        }
        let d = Mat::from_fn(dim, dim, |i, j| if i == j { diag[i] } else { ZERO });
        Ok(&(&self.vectors * &d) * &self.vectors_inv)
    }

    /// Applies `b(T)` to a vector in eigencoordinates (null part dropped).
    pub fn apply_calculus(&self, b: impl Fn(C) -> C, f: &Col<C>) -> Col<C> {
        let dim = self.dim();
        let mut c = vec![ZERO; dim];
        for i in 0..dim {
            let mut s = ZERO;
            for j in 0..dim {
                s += self.vectors_inv[(i, j)] * f[j];
            }
            c[i] = if self.class[i] == SpectralClass::Null {
                ZERO
            } else {
                b(self.values[i]) * s
            };
        }
        Col::from_fn(dim, |i| {
            let mut s = ZERO;
            for j in 0..dim {
                if c[j] != ZERO {
                    s += self.vectors[(i, j)] * c[j];
                }
            }
            s
        })
    }

    pub fn spectral_projector(&self, which: SpectralClass) -> Mat<C> {
        let dim = self.dim();
        let d = Mat::from_fn(dim, dim, |i, j| {
            if i == j && self.class[i] == which {
                cr(1.0)
            } else {
                ZERO
            }
        });
        &(&self.vectors * &d) * &self.vectors_inv
    }

    pub fn eplus(&self) -> Mat<C> {
        self.spectral_projector(SpectralClass::Plus)
    }

    pub fn eminus(&self) -> Mat<C> {
        self.spectral_projector(SpectralClass::Minus)
    }

    pub fn enull(&self) -> Mat<C> {
        self.spectral_projector(SpectralClass::Null)
    }

    /// The Cauchy operator `sgn(T)` (zero on the null part).
    ///
    /// Computed once by a matrix-sign Newton iteration on the null-deflated
    /// operator `T + ‖T‖·Π₀`; the iteration self-corrects quadratically, so
    /// the result stays accurate even when the eigenvector matrix is badly
    /// conditioned (clustered eigenvalues).
    pub fn cauchy_operator(&self) -> Mat<C> {
        self.sign_cell
            .get_or_init(|| {
                let e0 = self.spectral_projector(SpectralClass::Null);
                let deflated = &self.mat + &scale(cr(self.norm_t.max(1.0)), &e0);
                let s = linalg::sign_newton(&deflated);
                &s - &e0
            })
            .clone()
    }

    /// `F_t = e^{-t|T|} χ₊(T) f`.
    pub fn semigroup_evolve(&self, f: &Col<C>, t: f64) -> Col<C> {
        self.apply_calculus(
            |l| {
                if l.re > 0.0 {
                    (-l * cr(t)).exp()
                } else {
                    ZERO
                }
            },
            f,
        )
    }

    /// `t ∂_t F_t` for the plus semigroup, analytically in eigencoordinates.
    pub fn semigroup_t_derivative(&self, f: &Col<C>, t: f64) -> Col<C> {
        self.apply_calculus(
            |l| {
                if l.re > 0.0 {
                    -l * cr(t) * (-l * cr(t)).exp()
                } else {
                    ZERO
                }
            },
            f,
        )
    }

    /// Eigencoordinates of `f`.
    pub fn coeffs(&self, f: &Col<C>) -> Vec<C> {
        let dim = self.dim();
        (0..dim)
            .map(|i| {
                let mut s = ZERO;
                for j in 0..dim {
                    s += self.vectors_inv[(i, j)] * f[j];
                }
                s
            })
            .collect()
    }

    /// Orthonormal basis of `range(χ₊)` from the plus eigenvectors.
    pub fn plus_basis(&self) -> Mat<C> {
        let dim = self.dim();
        let idx: Vec<usize> = (0..dim)
            .filter(|&i| self.class[i] == SpectralClass::Plus)
            .collect();
        let cols = Mat::from_fn(dim, idx.len(), |i, j| self.vectors[(i, idx[j])]);
        linalg::orthonormalize(&cols)
    }

    /// Number of eigenvalues in each class `(plus, minus, null)`.
    pub fn class_counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for cl in &self.class {
            match cl {
                SpectralClass::Plus => c.0 += 1,
                SpectralClass::Minus => c.1 += 1,
                SpectralClass::Null => c.2 += 1,
            }
        }
        c
    }
}

/// Max over the sampled points of `dist(λ, S_ω)·‖(λI - T)⁻¹‖`.
pub fn resolvent_bound_probe(op: &DiscreteOperator, omega: f64, lambdas: &[C]) -> f64 {
    let dim = op.dim();
    let mut worst: f64 = 0.0;
    for &l in lambdas {
        let shifted = &scale(l, &identity(dim)) - &op.mat;
        let smin = linalg::sigma_min(&shifted);
        if smin <= 0.0 {
            return f64::INFINITY;
        }
        let d = linalg::dist_to_double_sector(l, omega);
        worst = worst.max(d / smin);
    }
    worst
}

/// `∫ ψ(ā t) ψ(b t) dt/t` for `ψ(z) = z/(1+z²)`, by the closed form
/// `(ab/2)·(Ln a² − Ln b²)/(a² − b²)`; both `a²`, `b²` avoid the negative
/// real axis for bisectorial eigenvalues.
fn psi_pair_integral(li: C, lj: C) -> C {
    let a = li.conj();
    let b = lj;
    let a2 = a * a;
    let b2 = b * b;
    let diff = a2 - b2;
    let scale_ref = a2.abs().max(b2.abs());
    if diff.abs() < 1e-8 * scale_ref {
        // ln(u)/(u-1) = 1 - e/2 + e²/3 - … with u = a²/b², e = u-1
        let e = a2 / b2 - cr(1.0);
        let series = cr(1.0) - e * cr(0.5) + e * e * cr(1.0 / 3.0) - e * e * e * cr(0.25);
        a * b / (b2 * cr(2.0)) * series
    } else {
        a * b * cr(0.5) * (a2.ln() - b2.ln()) / diff
    }
}

/// Adaptive Simpson quadrature of `∫ ψ(ā e^u)ψ(b e^u) du` over the real
/// line; the independent numeric cross-check for [`psi_pair_integral`].
pub fn psi_pair_quadrature(li: C, lj: C, tol_q: f64) -> C {
    let a = li.conj();
    let b = lj;
    let g = |u: f64| -> C {
        let t = cr(u.exp());
        let za = a * t;
        let zb = b * t;
        (za / (cr(1.0) + za * za)) * (zb / (cr(1.0) + zb * zb))
    };
    fn simpson(g: &dyn Fn(f64) -> C, a: f64, b: f64, fa: C, fm: C, fb: C, tol: f64, depth: usize) -> C {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = g(lm);
        let frm = g(rm);
        let h = b - a;
        let whole = (fa + fm * cr(4.0) + fb) * cr(h / 6.0);
        let left = (fa + flm * cr(4.0) + fm) * cr(h / 12.0);
        let right = (fm + frm * cr(4.0) + fb) * cr(h / 12.0);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() < 15.0 * tol {
            left + right + delta / cr(15.0)
        } else {
            simpson(g, a, m, fa, flm, fm, tol / 2.0, depth - 1)
                + simpson(g, m, b, fm, frm, fb, tol / 2.0, depth - 1)
        }
    }
    // split the scale-centered window so the peak near u = -ln|λ| is resolved
    let center = -0.5 * (li.abs().max(1e-12).ln() + lj.abs().max(1e-12).ln());
    let (lo, hi) = (center - 20.0, center + 20.0);
    let mid = center;
    simpson(&g, lo, mid, g(lo), g(0.5 * (lo + mid)), g(mid), tol_q, 42)
        + simpson(&g, mid, hi, g(mid), g(0.5 * (mid + hi)), g(hi), tol_q, 42)
}

#[derive(Debug, Clone, Copy)]
pub struct QuadraticReport {
    pub value: f64,
    /// `Q(f)/‖f‖²`.
    pub ratio: f64,
    /// Whether the eigencoordinate closed form was used (otherwise a t-grid
    /// operator quadrature).
    pub analytic: bool,
}

/// `Q(f) = ∫₀^∞ ‖ψ(tT)f‖² dt/t` with `ψ(z) = z/(1+z²)`, computed exactly in
/// eigencoordinates (with the eigenbasis Gram matrix) when the eigenvector
/// conditioning allows, otherwise by a log-grid operator quadrature.
pub fn quadratic_functional(frame: &HardyFrame, f: &Col<C>, t_op: &DiscreteOperator) -> QuadraticReport {
    let f2 = linalg::col_norm(f).powi(2);
    if frame.vcond < tol::EIGVEC_COND_ANALYTIC {
        let value = quadratic_eigen(frame, f, psi_pair_integral);
        QuadraticReport {
            value,
            ratio: value / f2,
            analytic: true,
        }
    } else {
        let value = quadratic_grid(frame, f, t_op);
        QuadraticReport {
            value,
            ratio: value / f2,
            analytic: false,
        }
    }
}

/// Same assembly as the analytic route but with numerically integrated
/// scalar kernels. Used as an independent cross-check.
pub fn quadratic_functional_quadrature(frame: &HardyFrame, f: &Col<C>, tol_q: f64) -> f64 {
    quadratic_eigen(frame, f, |li, lj| psi_pair_quadrature(li, lj, tol_q))
}

fn quadratic_eigen(frame: &HardyFrame, f: &Col<C>, kernel: impl Fn(C, C) -> C) -> f64 {
    let dim = frame.dim();
    let gram = &adjoint(&frame.vectors) * &frame.vectors;
    let coeffs = frame.coeffs(f);
    let idx: Vec<usize> = (0..dim)
        .filter(|&i| frame.class[i] != SpectralClass::Null && coeffs[i].abs() > 0.0)
        .collect();
    let mut total = ZERO;
    for &i in &idx {
        for &j in &idx {
            let k = kernel(frame.values[i], frame.values[j]);
            total += coeffs[i].conj() * coeffs[j] * gram[(i, j)] * k;
        }
    }
    total.re.max(0.0)
}

/// Precomputed Gram/kernel tables for repeated quadratic-functional
/// evaluations against one frame.
pub struct QuadraticEvaluator<'a> {
    frame: &'a HardyFrame,
    gram: Mat<C>,
    kern: Mat<C>,
}

impl<'a> QuadraticEvaluator<'a> {
    pub fn new(frame: &'a HardyFrame) -> Self {
        let dim = frame.dim();
        let gram = &adjoint(&frame.vectors) * &frame.vectors;
        let kern = Mat::from_fn(dim, dim, |i, j| {
            if frame.class[i] == SpectralClass::Null || frame.class[j] == SpectralClass::Null {
                ZERO
            } else {
                psi_pair_integral(frame.values[i], frame.values[j])
            }
        });
        QuadraticEvaluator { frame, gram, kern }
    }

    /// `Q(f)/‖f‖²` through the analytic eigencoordinate closed form.
    pub fn ratio(&self, f: &Col<C>) -> f64 {
        let dim = self.frame.dim();
        let coeffs = self.frame.coeffs(f);
        let mut total = ZERO;
        for i in 0..dim {
            if self.frame.class[i] == SpectralClass::Null {
                continue;
            }
            for j in 0..dim {
                if self.frame.class[j] == SpectralClass::Null {
                    continue;
                }
                total += coeffs[i].conj() * coeffs[j] * self.gram[(i, j)] * self.kern[(i, j)];
            }
        }
        total.re.max(0.0) / linalg::col_norm(f).powi(2)
    }
}

fn quadratic_grid(frame: &HardyFrame, f: &Col<C>, t_op: &DiscreteOperator) -> f64 {
    let fs = Mat::from_fn(f.nrows(), 1, |i, _| f[i]);
    quadratic_ratios_grid(frame, t_op, &fs)[0] * linalg::col_norm(f).powi(2)
}

/// Batched log-grid operator quadrature of `Q(f)/‖f‖²` for many vectors at
/// once (columns of `fs`); one LU factorization per grid point is shared by
/// all right-hand sides.
pub fn quadratic_ratios_grid(
    frame: &HardyFrame,
    t_op: &DiscreteOperator,
    fs: &Mat<C>,
) -> Vec<f64> {
    use faer::prelude::SpSolver;
    let grid = crate::symbol::log_t_grid(&frame.lattice, &[]);
    let dim = frame.dim();
    let nrhs = fs.ncols();
    let t2 = &t_op.mat * &t_op.mat;
    let tf = &t_op.mat * fs;
    let mut acc = vec![0.0f64; nrhs];
    // trapezoid weights in ln t
    let weights: Vec<f64> = (0..grid.len())
        .map(|i| {
            if i == 0 {
                0.5 * (grid[1] / grid[0]).ln()
            } else if i + 1 == grid.len() {
                0.5 * (grid[i] / grid[i - 1]).ln()
            } else {
                0.5 * (grid[i + 1] / grid[i - 1]).ln()
            }
        })
        .collect();
    for (gi, &t) in grid.iter().enumerate() {
        let lhs = &identity(dim) + &scale(cr(t * t), &t2);
        let lu = lhs.partial_piv_lu();
        let rhs = faer::scale(cr(t)) * &tf;
        let x = lu.solve(&rhs);
        for j in 0..nrhs {
            let mut nrm2 = 0.0;
            for i in 0..dim {
                nrm2 += x[(i, j)].norm_sqr();
            }
            acc[j] += weights[gi] * nrm2;
        }
    }
    (0..nrhs)
        .map(|j| {
            let mut f2 = 0.0;
            for i in 0..dim {
                f2 += fs[(i, j)].norm_sqr();
            }
            acc[j] / f2.max(1e-300)
        })
        .collect()
}

/// Windowed non-tangential maximal norm `‖Ñ*(F)‖₂` from field slices on a
/// (t, grid) raster; `slices[ti]` is point-major with `comps` components.
pub fn ntmax_norm(
    lattice: &FrequencyLattice,
    t_grid: &[f64],
    slices: &[Vec<C>],
    comps: usize,
    c0: f64,
    c1: f64,
) -> f64 {
    let p = lattice.num_points();
    let n = lattice.n;
    let cell = (2.0 * std::f64::consts::PI / lattice.size as f64).powi(n as i32);
    // |F|² per (t, point)
    let mut dens: Vec<Vec<f64>> = Vec::with_capacity(t_grid.len());
    for s in slices {
        dens.push(
            (0..p)
                .map(|j| (0..comps).map(|c| s[j * comps + c].norm_sqr()).sum())
                .collect(),
        );
    }
    let points: Vec<Vec<f64>> = (0..p).map(|j| lattice.point(j)).collect();
    let torus_dist2 = |a: &[f64], b: &[f64]| -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        a.iter()
            .zip(b.iter())
            .map(|(&x, &y)| {
                let d = (x - y).abs() % two_pi;
                let d = d.min(two_pi - d);
                d * d
            })
            .sum()
    };
    let mut total = 0.0;
    for j in 0..p {
        let mut best: f64 = 0.0;
        for (ti, &t) in t_grid.iter().enumerate() {
            let (lo, hi) = ((1.0 - c0) * t, (1.0 + c0) * t);
            // s-window indices on the t-grid
            let idx: Vec<usize> = (0..t_grid.len())
                .filter(|&q| t_grid[q] >= lo && t_grid[q] <= hi)
                .collect();
            if idx.is_empty() {
                continue;
            }
            let r2 = (c1 * t) * (c1 * t);
            // spatial sum over the ball at each window level
            let space_sum = |q: usize| -> f64 {
                let mut s = 0.0;
                for jj in 0..p {
                    if torus_dist2(&points[j], &points[jj]) <= r2 {
                        s += dens[q][jj];
                    }
                }
                s * cell
            };
            let mut integral = 0.0;
            if idx.len() == 1 {
                integral = space_sum(idx[0]) * (hi - lo);
            } else {
                let sums: Vec<f64> = idx.iter().map(|&q| space_sum(q)).collect();
                for w in 1..idx.len() {
                    let dt = t_grid[idx[w]] - t_grid[idx[w - 1]];
                    integral += 0.5 * (sums[w] + sums[w - 1]) * dt;
                }
            }
            let val = integral / t.powi(1 + n as i32);
            best = best.max(val);
            let _ = ti;
        }
        total += best * cell;
    }
    total.sqrt()
}

/// The four solution norms for the upper Hardy evolution of `f`.
pub fn norm_bundle(
    frame: &HardyFrame,
    f: &Col<C>,
    t_grid: &[f64],
    c0: f64,
    c1: f64,
) -> NormBundle {
    let phys = (2.0 * std::f64::consts::PI / frame.lattice.size as f64).sqrt();
    let fplus = frame.semigroup_evolve(f, 0.0);
    let trace_norm = phys * linalg::col_norm(f);
    let mut sup = linalg::col_norm(&fplus);
    for &t in t_grid {
        sup = sup.max(linalg::col_norm(&frame.semigroup_evolve(f, t)));
    }
    let sup_norm = phys * sup;

    // square function over the plus part, exactly in eigencoordinates:
    // kernels λ̄λ'/(λ̄+λ')²
    let dim = frame.dim();
    let coeffs = frame.coeffs(f);
    let idx: Vec<usize> = (0..dim)
        .filter(|&i| frame.class[i] == SpectralClass::Plus)
        .collect();
    let mut total = ZERO;
    for &i in &idx {
        for &j in &idx {
            let mut gram = ZERO;
            for r in 0..dim {
                gram += frame.vectors[(r, i)].conj() * frame.vectors[(r, j)];
            }
            let li = frame.values[i];
            let lj = frame.values[j];
            let k = li.conj() * lj / ((li.conj() + lj) * (li.conj() + lj));
            total += coeffs[i].conj() * coeffs[j] * gram * k;
        }
    }
    let square_function = phys * total.re.max(0.0).sqrt();

    let dim_c = 2 * frame.m;
    let slices: Vec<Vec<C>> = t_grid
        .iter()
        .map(|&t| {
            let ft = frame.semigroup_evolve(f, t);
            let coeffs_vec: Vec<C> = (0..frame.dim()).map(|i| ft[i]).collect();
            frame.lattice.inverse_unitary(&coeffs_vec, dim_c)
        })
        .collect();
    let ntmax = Some(ntmax_norm(&frame.lattice, t_grid, &slices, dim_c, c0, c1));

    NormBundle {
        trace_norm,
        sup_norm,
        square_function,
        ntmax,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormSelector {
    Trace,
    Sup,
    SquareFunction,
}

#[derive(Debug, Clone, Copy)]
pub struct LipschitzReport {
    pub ratio: f64,
    /// Set when the two fields coincide (0/0 guarded).
    pub degenerate: bool,
}

/// `‖F_{A2} - F_{A1}‖_X / ‖A2 - A1‖_∞` for the upper Hardy evolutions of a
/// fixed trace `f`.
pub fn lipschitz_probe(
    a1: &CoefficientField,
    a2: &CoefficientField,
    f: &Col<C>,
    selector: NormSelector,
    lattice: &FrequencyLattice,
) -> Result<LipschitzReport> {
    let mut delta: f64 = 0.0;
    for (s1, s2) in a1.samples().iter().zip(a2.samples().iter()) {
        delta = delta.max(opnorm(&(s2 - s1)));
    }
    if a1.num_samples() != a2.num_samples() {
        return Err(CoreError::DimensionMismatch(
            "coefficient fields must share a grid".into(),
        ));
    }
    if delta < 1e-14 * a1.norm_inf().max(1.0) {
        return Ok(LipschitzReport {
            ratio: 0.0,
            degenerate: true,
        });
    }
    let t1 = assemble_ta(a1, lattice)?;
    let t2 = assemble_ta(a2, lattice)?;
    let fr1 = hardy_frame(&t1)?;
    let fr2 = hardy_frame(&t2)?;
    let grid = crate::symbol::log_t_grid(lattice, &[]);
    let norm = match selector {
        NormSelector::Trace => {
            let d = &fr2.semigroup_evolve(f, 0.0) - &fr1.semigroup_evolve(f, 0.0);
            linalg::col_norm(&d)
        }
        NormSelector::Sup => {
            let mut sup: f64 = 0.0;
            for &t in &grid {
                let d = &fr2.semigroup_evolve(f, t) - &fr1.semigroup_evolve(f, t);
                sup = sup.max(linalg::col_norm(&d));
            }
            sup
        }
        NormSelector::SquareFunction => {
            // log-trapezoid of ‖t∂_t(F₂ - F₁)‖² dt/t
            let vals: Vec<f64> = grid
                .iter()
                .map(|&t| {
                    let d = &fr2.semigroup_t_derivative(f, t) - &fr1.semigroup_t_derivative(f, t);
                    linalg::col_norm(&d).powi(2)
                })
                .collect();
            let mut total = 0.0;
            for i in 1..grid.len() {
                total += 0.5 * (vals[i] + vals[i - 1]) * (grid[i] / grid[i - 1]).ln();
            }
            total.sqrt()
        }
    };
    Ok(LipschitzReport {
        ratio: norm / delta,
        degenerate: false,
    })
}
