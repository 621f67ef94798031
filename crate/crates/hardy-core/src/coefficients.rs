//! Coefficient matrices `A(x)` and their transforms.
//!
//! A coefficient field is a complex `(1+n)m × (1+n)m` matrix function on the
//! n-torus, stored in the normal/tangential block layout
//! `[A00 A0∥; A∥0 A∥∥]`.  Component ordering of vectors: the `m` normal
//! components come first, then the tangential ones, axis-major
//! (`m + ax·m + α`).
//!
//! The triangular factors are
//! `Ābar = [A00 A0∥; 0 I]` and `A̲ = [I 0; A∥0 A∥∥]`, so that
//! `Ābar f = (Af)₀ + f∥` and `A̲ f = f₀ + (Af)∥`, and the transformed
//! coefficients are `Â = A̲ Ābar⁻¹`, an involution on accretive fields.

use faer::{Col, Mat};
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::lattice::FrequencyLattice;
use crate::linalg::{
    self, adjoint, cr, eigh, identity, inverse_refined, min_eig_hermitian_part,
    numerical_range_angle, opnorm, scale, C, ZERO,
};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Kind {
    Constant,
    Grid { size: usize },
}

#[derive(Debug, Clone)]
pub struct CoefficientField {
    /// Boundary dimension.
    pub n: usize,
    /// System size.
    pub m: usize,
    pub kind: Kind,
    samples: Vec<Mat<C>>,
}

/// Classification flags from the well-posedness classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClassFlags {
    pub hermitean: bool,
    pub block: bool,
    pub constant: bool,
    pub jacobian_type: bool,
}

/// Quantified accretivity of a coefficient field on the discretization.
#[derive(Debug, Clone, Serialize)]
pub struct AccretivityReport {
    /// Pointwise accretivity constant; `None` when the pointwise Hermitian
    /// part is not positive definite (still possible to be accretive on the
    /// curl-free subspace when n ≥ 2).
    pub kappa_pointwise: Option<f64>,
    /// Accretivity constant on the discretized curl-free subspace.
    pub kappa_curlfree: f64,
    /// `(A00 pointwise, A∥∥ on gradient fields)` accretivity constants.
    pub kappa_blocks: (f64, f64),
    /// Angle of accretivity of `Â` on the discretized range of `D`.
    pub omega_hat: f64,
    /// Angle of accretivity of `A` itself on the same subspace (diagnostic).
    pub omega_a: f64,
}

impl CoefficientField {
    pub fn constant(n: usize, m: usize, matrix: Mat<C>) -> Result<Self> {
        Self::build(n, m, Kind::Constant, vec![matrix])
    }

    pub fn grid(n: usize, m: usize, size: usize, samples: Vec<Mat<C>>) -> Result<Self> {
        if !size.is_power_of_two() || size < 2 {
            return Err(CoreError::InvalidInput(format!(
                "grid size must be a power of two ≥ 2, got {size}"
            )));
        }
        if samples.len() != size.pow(n as u32) {
            return Err(CoreError::DimensionMismatch(format!(
                "expected {} samples, got {}",
                size.pow(n as u32),
                samples.len()
            )));
        }
        Self::build(n, m, Kind::Grid { size }, samples)
    }

    fn build(n: usize, m: usize, kind: Kind, samples: Vec<Mat<C>>) -> Result<Self> {
        let dim = (1 + n) * m;
        for s in &samples {
            if s.nrows() != dim || s.ncols() != dim {
                return Err(CoreError::DimensionMismatch(format!(
                    "sample must be {dim}×{dim}, got {}×{}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            for j in 0..dim {
                for i in 0..dim {
                    let z = s[(i, j)];
                    if !z.re.is_finite() || !z.im.is_finite() {
                        return Err(CoreError::InvalidInput(
                            "coefficient sample contains NaN/Inf".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self { n, m, kind, samples })
    }

    pub fn dim(&self) -> usize {
        (1 + self.n) * self.m
    }

    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, Kind::Constant)
    }

    pub fn sample(&self, idx: usize) -> &Mat<C> {
        match self.kind {
            Kind::Constant => &self.samples[0],
            Kind::Grid { .. } => &self.samples[idx],
        }
    }

    pub fn samples(&self) -> &[Mat<C>] {
        &self.samples
    }

    /// Max over samples of the operator 2-norm.
    pub fn norm_inf(&self) -> f64 {
        self.samples.iter().map(opnorm).fold(0.0, f64::max)
    }

    pub fn block_a00(&self, s: &Mat<C>) -> Mat<C> {
        s.submatrix(0, 0, self.m, self.m).to_owned()
    }

    pub fn block_a0t(&self, s: &Mat<C>) -> Mat<C> {
        s.submatrix(0, self.m, self.m, self.n * self.m).to_owned()
    }

    pub fn block_at0(&self, s: &Mat<C>) -> Mat<C> {
        s.submatrix(self.m, 0, self.n * self.m, self.m).to_owned()
    }

    pub fn block_att(&self, s: &Mat<C>) -> Mat<C> {
        s.submatrix(self.m, self.m, self.n * self.m, self.n * self.m)
            .to_owned()
    }

    pub fn from_blocks(
        &self,
        a00: &Mat<C>,
        a0t: &Mat<C>,
        at0: &Mat<C>,
        att: &Mat<C>,
    ) -> Mat<C> {
        let (m, nm) = (self.m, self.n * self.m);
        Mat::from_fn(m + nm, m + nm, |i, j| match (i < m, j < m) {
            (true, true) => a00[(i, j)],
            (true, false) => a0t[(i, j - m)],
            (false, true) => at0[(i - m, j)],
            (false, false) => att[(i - m, j - m)],
        })
    }

    fn check_a00_invertible(&self) -> Result<()> {
        let scale = self.norm_inf();
        for s in &self.samples {
            let a00 = self.block_a00(s);
            let sig = linalg::sigma_min(&a00);
            if sig < tol::SINGULAR_A00_REL * scale {
                return Err(CoreError::SingularNormalBlock {
                    min_sigma: sig,
                    scale,
                });
            }
        }
        Ok(())
    }

    /// The triangular factors `(Ābar, A̲)` per sample.
    pub fn split_triangular(&self) -> Result<TriangularFactors> {
        self.check_a00_invertible()?;
        let (m, nm) = (self.m, self.n * self.m);
        let mut upper = Vec::with_capacity(self.samples.len());
        let mut lower = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            let a00 = self.block_a00(s);
            let a0t = self.block_a0t(s);
            let at0 = self.block_at0(s);
            let att = self.block_att(s);
            upper.push(self.from_blocks(&a00, &a0t, &Mat::zeros(nm, m), &identity(nm)));
            lower.push(self.from_blocks(&identity(m), &Mat::zeros(m, nm), &at0, &att));
        }
        Ok(TriangularFactors { upper, lower })
    }

    /// The transformed coefficients `Â = A̲ Ābar⁻¹`, computed block-wise as
    /// `[A00⁻¹, -A00⁻¹A0∥; A∥0 A00⁻¹, A∥∥ - A∥0 A00⁻¹ A0∥]`.
    pub fn hat_transform(&self) -> Result<CoefficientField> {
        self.check_a00_invertible()?;
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let a00 = self.block_a00(s);
                let a0t = self.block_a0t(s);
                let at0 = self.block_at0(s);
                let att = self.block_att(s);
                let a00_inv = inverse_refined(&a00);
                let top_right = scale(cr(-1.0), &(&a00_inv * &a0t));
                let bottom_left = &at0 * &a00_inv;
                let schur = &att - &(&(&at0 * &a00_inv) * &a0t);
                self.from_blocks(&a00_inv, &top_right, &bottom_left, &schur)
            })
            .collect();
        CoefficientField::build(self.n, self.m, self.kind, samples)
    }

    /// Classification flags, each relative to `1e-12 · ‖A‖`.
    pub fn classify(&self) -> ClassFlags {
        let scale_norm = self.norm_inf().max(f64::MIN_POSITIVE);
        let tol = tol::CLASSIFY_REL * scale_norm;
        let hermitean = self
            .samples
            .iter()
            .all(|s| opnorm(&(s - &adjoint(s))) < tol);
        let block = self.samples.iter().all(|s| {
            opnorm(&self.block_a0t(s)) < tol && opnorm(&self.block_at0(s)) < tol
        });
        let constant = self.samples.iter().all(|s| {
            let d = s - self.sample(0);
            d.norm_max() < tol
        });
        let jacobian_type = self.is_jacobian_type(tol);
        ClassFlags {
            hermitean,
            block,
            constant,
            jacobian_type,
        }
    }

    fn is_jacobian_type(&self, tol: f64) -> bool {
        let (n, m) = (self.n, self.m);
        for s in &self.samples {
            let dim = self.dim();
            for j in 0..dim {
                for i in 0..dim {
                    if s[(i, j)].im.abs() >= tol {
                        return false;
                    }
                }
            }
            let att = self.block_att(s);
            if opnorm(&(&att - &identity(n * m))) >= tol {
                return false;
            }
            let a0t = self.block_a0t(s);
            let at0 = self.block_at0(s);
            if opnorm(&(&a0t - &at0.transpose().to_owned())) >= tol {
                return false;
            }
            // at0 must be (-grad g) ⊗ I_m and a00 = (1 + |grad g|²) I_m
            let mut grad = vec![0.0; n];
            for ax in 0..n {
                grad[ax] = -at0[(ax * m, 0)].re;
                for b in 0..m {
                    for a in 0..m {
                        let expect = if a == b { cr(-grad[ax]) } else { ZERO };
                        if (at0[(ax * m + a, b)] - expect).abs() >= tol {
                            return false;
                        }
                    }
                }
            }
            let g2: f64 = grad.iter().map(|v| v * v).sum();
            let a00 = self.block_a00(s);
            if opnorm(&(&a00 - &scale(cr(1.0 + g2), &identity(m)))) >= tol {
                return false;
            }
        }
        true
    }

    /// Quantifies every accretivity notion on the given lattice.
    pub fn accretivity_report(&self, lattice: &FrequencyLattice) -> Result<AccretivityReport> {
        if lattice.n != self.n {
            return Err(CoreError::DimensionMismatch(
                "lattice dimension must match coefficient dimension".into(),
            ));
        }
        let kp = self
            .samples
            .iter()
            .map(min_eig_hermitian_part)
            .fold(f64::INFINITY, f64::min);
        let kappa_pointwise = if kp > 0.0 { Some(kp) } else { None };

        let ma = multiplication_operator(self, lattice);
        let herm = scale(cr(0.5), &(&ma + &adjoint(&ma)));
        let curlfree = curl_free_basis(self.n, self.m, lattice, true);
        let hc = &(&adjoint(&curlfree) * &herm) * &curlfree;
        let (vals, _) = eigh(&hc);
        let kappa_curlfree = vals[0];
        if kappa_curlfree <= 0.0 {
            return Err(CoreError::NotAccretive {
                kappa: kappa_curlfree,
            });
        }

        let kappa_00 = self
            .samples
            .iter()
            .map(|s| min_eig_hermitian_part(&self.block_a00(s)))
            .fold(f64::INFINITY, f64::min);
        let att_samples: Vec<Mat<C>> = self.samples.iter().map(|s| self.block_att(s)).collect();
        let matt = mult_operator_from_samples(&att_samples, self.n * self.m, lattice);
        let herm_att = scale(cr(0.5), &(&matt + &adjoint(&matt)));
        let grad_basis = gradient_basis(self.n, self.m, lattice);
        let hg = &(&adjoint(&grad_basis) * &herm_att) * &grad_basis;
        let (gvals, _) = eigh(&hg);
        let kappa_att = gvals[0];

        // Angles on the discretized range of D (curl-free modes, zero mean).
        let rd = curl_free_basis(self.n, self.m, lattice, false);
        let ahat = self.hat_transform()?;
        let mhat = multiplication_operator(&ahat, lattice);
        let comp_hat = &(&adjoint(&rd) * &mhat) * &rd;
        let omega_hat = numerical_range_angle(&comp_hat).ok_or(CoreError::NotAccretive {
            kappa: kappa_curlfree,
        })?;
        let comp_a = &(&adjoint(&rd) * &ma) * &rd;
        let omega_a = numerical_range_angle(&comp_a).ok_or(CoreError::NotAccretive {
            kappa: kappa_curlfree,
        })?;

        Ok(AccretivityReport {
            kappa_pointwise,
            kappa_curlfree,
            kappa_blocks: (kappa_00, kappa_att),
            omega_hat,
            omega_a,
        })
    }
}

pub struct TriangularFactors {
    /// `Ābar = [A00 A0∥; 0 I]` per sample.
    pub upper: Vec<Mat<C>>,
    /// `A̲ = [I 0; A∥0 A∥∥]` per sample.
    pub lower: Vec<Mat<C>>,
}

/// Multiplication operator of a coefficient field in the frequency basis:
/// the block convolution `(M_A f)(ξ) = Σ_η Â(ξ-η) f(η)` with wrap-around,
/// exactly unitarily equivalent to sample-wise multiplication.
pub fn multiplication_operator(field: &CoefficientField, lattice: &FrequencyLattice) -> Mat<C> {
    let dim = field.dim();
    match field.kind {
        Kind::Constant => block_diagonal_constant(field.sample(0), lattice),
        Kind::Grid { .. } => mult_operator_from_samples(field.samples(), dim, lattice),
    }
}

/// Same as [`multiplication_operator`] but for raw per-sample square blocks.
pub fn mult_operator_from_samples(
    samples: &[Mat<C>],
    dim: usize,
    lattice: &FrequencyLattice,
) -> Mat<C> {
    let p = lattice.num_points();
    if samples.len() == 1 {
        return block_diagonal_constant(&samples[0], lattice);
    }
    assert_eq!(samples.len(), p);
    // DFT coefficients of the matrix samples, entry-wise.
    let mut coeffs: Vec<Mat<C>> = Vec::with_capacity(p);
    {
        let mut flat: Vec<C> = Vec::with_capacity(p * dim * dim);
        for s in samples {
            for i in 0..dim {
                for j in 0..dim {
                    flat.push(s[(i, j)]);
                }
            }
        }
        let hat = lattice.dft_coeffs(&flat, dim * dim);
        for k in 0..p {
            coeffs.push(Mat::from_fn(dim, dim, |i, j| hat[k * dim * dim + i * dim + j]));
        }
    }
    let total = p * dim;
    Mat::from_fn(total, total, |r, c| {
        let (kr, ir) = (r / dim, r % dim);
        let (kc, ic) = (c / dim, c % dim);
        let diff: Vec<i64> = lattice
            .freq(kr)
            .iter()
            .zip(lattice.freq(kc))
            .map(|(a, b)| a - b)
            .collect();
        coeffs[lattice.wrap_index(&diff)][(ir, ic)]
    })
}

fn block_diagonal_constant(sample: &Mat<C>, lattice: &FrequencyLattice) -> Mat<C> {
    let dim = sample.nrows();
    let p = lattice.num_points();
    Mat::from_fn(p * dim, p * dim, |r, c| {
        if r / dim == c / dim {
            sample[(r % dim, c % dim)]
        } else {
            ZERO
        }
    })
}

/// Orthonormal basis of the discretized curl-free subspace: per nonzero
/// frequency the span of `{e₀⊗ε_α, ξ̂⊗ε_α}`, plus (optionally) the full
/// zero-frequency block.
pub fn curl_free_basis(
    n: usize,
    m: usize,
    lattice: &FrequencyLattice,
    include_zero_mode: bool,
) -> Mat<C> {
    let dim = (1 + n) * m;
    let p = lattice.num_points();
    let mut cols: Vec<Col<C>> = Vec::new();
    for k in 0..p {
        let nrm = lattice.freq_norm(k);
        if nrm == 0.0 {
            if include_zero_mode {
                for comp in 0..dim {
                    let mut v = Col::zeros(p * dim);
                    v[k * dim + comp] = cr(1.0);
                    cols.push(v);
                }
            }
            continue;
        }
        let xi_hat: Vec<f64> = lattice.freq(k).iter().map(|&x| x as f64 / nrm).collect();
        for alpha in 0..m {
            let mut v = Col::zeros(p * dim);
            v[k * dim + alpha] = cr(1.0);
            cols.push(v);
        }
        for alpha in 0..m {
            let mut v = Col::zeros(p * dim);
            for ax in 0..n {
                v[k * dim + m + ax * m + alpha] = cr(xi_hat[ax]);
            }
            cols.push(v);
        }
    }
    Mat::from_fn(p * dim, cols.len(), |i, j| cols[j][i])
}

/// Orthonormal basis of gradient-type tangential fields `{ξ̂⊗ε_α : ξ ≠ 0}`
/// inside the tangential-only frequency space (block dimension `n·m`).
fn gradient_basis(n: usize, m: usize, lattice: &FrequencyLattice) -> Mat<C> {
    let dim = n * m;
    let p = lattice.num_points();
    let mut cols: Vec<Col<C>> = Vec::new();
    for k in 0..p {
        let nrm = lattice.freq_norm(k);
        if nrm == 0.0 {
            continue;
        }
        let xi_hat: Vec<f64> = lattice.freq(k).iter().map(|&x| x as f64 / nrm).collect();
        for alpha in 0..m {
            let mut v = Col::zeros(p * dim);
            for ax in 0..n {
                v[k * dim + ax * m + alpha] = cr(xi_hat[ax]);
            }
            cols.push(v);
        }
    }
    Mat::from_fn(p * dim, cols.len(), |i, j| cols[j][i])
}

/// Coefficients of Jacobian type from a periodic graph function:
/// `A = [1+|∇g|², -∇gᵗ; -∇g, I] ⊗ I_m`, with `∇g` computed spectrally
/// (the derivative of the Nyquist mode is set to zero to keep `∇g` real).
pub fn jacobian_coefficients(
    g_samples: &[f64],
    n: usize,
    m: usize,
    size: usize,
) -> Result<CoefficientField> {
    let lattice = FrequencyLattice::new(n, size)?;
    let p = lattice.num_points();
    if g_samples.len() != p {
        return Err(CoreError::DimensionMismatch(format!(
            "expected {} samples of g, got {}",
            p,
            g_samples.len()
        )));
    }
    let gc: Vec<C> = g_samples.iter().map(|&v| cr(v)).collect();
    let ghat = lattice.forward_unitary(&gc, 1);
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(n);
    for ax in 0..n {
        let mut dhat = ghat.clone();
        for k in 0..p {
            let xi = lattice.freq(k)[ax];
            let mult = if xi == -(size as i64) / 2 {
                ZERO
            } else {
                C::new(0.0, xi as f64)
            };
            dhat[k] = dhat[k] * mult;
        }
        let d = lattice.inverse_unitary(&dhat, 1);
        grads.push(d.iter().map(|z| z.re).collect());
    }
    let samples: Vec<Mat<C>> = (0..p)
        .map(|j| {
            let grad: Vec<f64> = (0..n).map(|ax| grads[ax][j]).collect();
            let g2: f64 = grad.iter().map(|v| v * v).sum();
            let dim = (1 + n) * m;
            Mat::from_fn(dim, dim, |r, c| {
                let (rb, ra) = if r < m { (None, r) } else { (Some((r - m) / m), (r - m) % m) };
                let (cb, ca) = if c < m { (None, c) } else { (Some((c - m) / m), (c - m) % m) };
                if ra != ca {
                    return ZERO;
                }
                match (rb, cb) {
                    (None, None) => cr(1.0 + g2),
                    (None, Some(ax)) => cr(-grad[ax]),
                    (Some(ax), None) => cr(-grad[ax]),
                    (Some(ax1), Some(ax2)) => {
                        if ax1 == ax2 {
                            cr(1.0)
                        } else {
                            ZERO
                        }
                    }
                }
            })
        })
        .collect();
    CoefficientField::grid(n, m, size, samples)
}

/// Applies `f ↦ (Af)₀ + f∥` sample-wise (the action of `Ābar`).
pub fn upper_action(field: &CoefficientField, sample_idx: usize, f: &Col<C>) -> Col<C> {
    let s = field.sample(sample_idx);
    let af = s * f;
    Col::from_fn(f.nrows(), |i| if i < field.m { af[i] } else { f[i] })
}

/// Applies `f ↦ f₀ + (Af)∥` sample-wise (the action of `A̲`).
pub fn lower_action(field: &CoefficientField, sample_idx: usize, f: &Col<C>) -> Col<C> {
    let s = field.sample(sample_idx);
    let af = s * f;
    Col::from_fn(f.nrows(), |i| if i < field.m { f[i] } else { af[i] })
}
