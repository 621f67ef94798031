//! Exterior algebra layer: k-vector fields on the half space.
//!
//! Basis k-vectors of `Λᵏ(R^{1+n})` are strictly increasing index subsets of
//! `{0,…,n}`, stored as bitmasks in ascending numeric order (= colex order on
//! subsets).  A basis element is *normal* when it contains the index 0 and
//! tangential otherwise.  Wedge/interior products carry the usual
//! ordered-insertion parity, and the first-order symbol is
//! `D_ξ = i(μ* μ_ξ + μ μ*_ξ)` with `μ = e₀∧·`, which squares to `|ξ|²` on its
//! range.  For constant accretive `B` the generator compresses to
//! `T_ξ = B̄⁻¹ D_ξ B̲` on the `2·C(n-1,k-1)`-dimensional space
//! `H^k_ξ = {f : μμ_ξ f = 0 = μ*μ*_ξ(Bf)}`.

use faer::{Col, Mat};

use crate::error::{CoreError, Result};
use crate::lattice::FrequencyLattice;
use crate::linalg::{self, adjoint, cr, identity, inverse_refined, opnorm, scale, C, ZERO};
use crate::report::{NormBundle, Residuals};
use crate::symbol::half_plane_projections;
use crate::tol;

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Basis subsets of `Λᵏ(R^{1+n})` as bitmasks over `{0,…,n}`, ascending.
pub fn basis_subsets(n: usize, k: usize) -> Vec<u32> {
    let total = n + 1;
    let mut out = Vec::with_capacity(binomial(total, k));
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize == k {
            out.push(mask);
        }
    }
    out
}

pub fn lambda_dim(n: usize, k: usize) -> usize {
    binomial(n + 1, k)
}

/// A complex k-vector.
#[derive(Debug, Clone)]
pub struct Multivector {
    pub n: usize,
    pub k: usize,
    pub coeffs: Vec<C>,
}

impl Multivector {
    pub fn zero(n: usize, k: usize) -> Self {
        Multivector {
            n,
            k,
            coeffs: vec![ZERO; lambda_dim(n, k)],
        }
    }

    pub fn basis_element(n: usize, k: usize, mask: u32) -> Result<Self> {
        let subsets = basis_subsets(n, k);
        let idx = subsets
            .iter()
            .position(|&m| m == mask)
            .ok_or(CoreError::InvalidInput(format!("mask {mask:#b} is not a {k}-subset")))?;
        let mut mv = Multivector::zero(n, k);
        mv.coeffs[idx] = cr(1.0);
        Ok(mv)
    }
}

/// Parity sign of inserting index `j` into the sorted subset `mask`:
/// `(-1)^{#(s ∈ mask, s < j)}`.
fn insertion_sign(mask: u32, j: usize) -> f64 {
    let below = (mask & ((1u32 << j) - 1)).count_ones();
    if below % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Matrix of `f ↦ v ∧ f : Λᵏ → Λᵏ⁺¹` for a complex 1-vector `v ∈ C^{1+n}`.
pub fn wedge_matrix(v: &[C], n: usize, k: usize) -> Result<Mat<C>> {
    if k + 1 > n + 1 {
        return Err(CoreError::DegreeOverflow { k: k + 1, n });
    }
    let from = basis_subsets(n, k);
    let to = basis_subsets(n, k + 1);
    let mut mat = Mat::zeros(to.len(), from.len());
    for (ci, &s) in from.iter().enumerate() {
        for (j, &vj) in v.iter().enumerate() {
            let bit = 1u32 << j;
            if s & bit != 0 {
                continue;
            }
            let target = s | bit;
            let ri = to.binary_search(&target).expect("target subset exists");
            mat[(ri, ci)] += vj * cr(insertion_sign(s, j));
        }
    }
    Ok(mat)
}

/// Matrix of `f ↦ v ⌟ f : Λᵏ → Λᵏ⁻¹` (left interior product, linear in `v`).
pub fn interior_matrix(v: &[C], n: usize, k: usize) -> Result<Mat<C>> {
    if k == 0 {
        return Err(CoreError::DegreeOverflow { k: 0, n });
    }
    let from = basis_subsets(n, k);
    let to = basis_subsets(n, k - 1);
    let mut mat = Mat::zeros(to.len(), from.len());
    for (ci, &s) in from.iter().enumerate() {
        for (j, &vj) in v.iter().enumerate() {
            let bit = 1u32 << j;
            if s & bit == 0 {
                continue;
            }
            let target = s & !bit;
            let ri = to.binary_search(&target).expect("target subset exists");
            // e_j ⌟ e_S = (-1)^{pos of j in S} e_{S∖j}
            mat[(ri, ci)] += vj * cr(insertion_sign(s & !bit, j));
        }
    }
    Ok(mat)
}

fn e0(n: usize) -> Vec<C> {
    let mut v = vec![ZERO; n + 1];
    v[0] = cr(1.0);
    v
}

fn embed_tangential(xi: &[f64]) -> Vec<C> {
    let mut v = vec![ZERO; xi.len() + 1];
    for (i, &x) in xi.iter().enumerate() {
        v[i + 1] = cr(x);
    }
    v
}

/// Residuals of the anticommutation relations on `Λᵏ`:
/// `‖μ_v μ_wᵗ + μ_wᵗ μ_v − (v·w) I‖` and `‖μ_v μ_w + μ_w μ_v‖`
/// (real vectors; the interior product is the transpose of the wedge).
pub fn anticommutator_residuals(v: &[f64], w: &[f64], n: usize, k: usize) -> Result<(f64, f64)> {
    let vc: Vec<C> = v.iter().map(|&x| cr(x)).collect();
    let wc: Vec<C> = w.iter().map(|&x| cr(x)).collect();
    let dim = lambda_dim(n, k);
    let dot: f64 = v.iter().zip(w.iter()).map(|(a, b)| a * b).sum();

    // μ_v μ_w* + μ_w* μ_v on Λᵏ
    let mv_up = wedge_matrix(&vc, n, k)?; // Λᵏ → Λᵏ⁺¹ (may be 0×dim rows if k = n+1)
    let mw_star_down = if k >= 1 {
        interior_matrix(&wc, n, k)?
    } else {
        Mat::zeros(0, dim)
    };
    let mv_from_below = if k >= 1 {
        wedge_matrix(&vc, n, k - 1)?
    } else {
        Mat::zeros(dim, 0)
    };
    let mw_star_from_above = interior_matrix(&wc, n, k + 1).unwrap_or_else(|_| Mat::zeros(dim, 0));
    let first = {
        let t1 = if k >= 1 {
            &mv_from_below * &mw_star_down
        } else {
            Mat::zeros(dim, dim)
        };
        let t2 = if mv_up.nrows() > 0 {
            &mw_star_from_above * &mv_up
        } else {
            Mat::zeros(dim, dim)
        };
        let sum = &t1 + &t2;
        opnorm(&(&sum - &scale(cr(dot), &identity(dim))))
    };

    // μ_v μ_w + μ_w μ_v : Λᵏ → Λᵏ⁺²
    let second = if k + 2 <= n + 1 {
        let wv = &wedge_matrix(&vc, n, k + 1)? * &wedge_matrix(&wc, n, k)?;
        let vw = &wedge_matrix(&wc, n, k + 1)? * &wedge_matrix(&vc, n, k)?;
        opnorm(&(&wv + &vw))
    } else {
        0.0
    };
    Ok((first, second))
}

/// `D_ξ = i(μ* μ_ξ + μ μ*_ξ)` on `Λᵏ`.
pub fn dxi_forms(xi: &[f64], n: usize, k: usize) -> Result<Mat<C>> {
    let dim = lambda_dim(n, k);
    let xic = embed_tangential(xi);
    let e0c = e0(n);
    let up = if k + 1 <= n + 1 {
        let mu_xi = wedge_matrix(&xic, n, k)?; // Λᵏ → Λᵏ⁺¹
        let mu_star = interior_matrix(&e0c, n, k + 1)?; // Λᵏ⁺¹ → Λᵏ
        &mu_star * &mu_xi
    } else {
        Mat::zeros(dim, dim)
    };
    let down = if k >= 1 {
        let mu_xi_star = interior_matrix(&xic, n, k)?; // Λᵏ → Λᵏ⁻¹
        let mu = wedge_matrix(&e0c, n, k - 1)?; // Λᵏ⁻¹ → Λᵏ
        &mu * &mu_xi_star
    } else {
        Mat::zeros(dim, dim)
    };
    Ok(scale(C::new(0.0, 1.0), &(&up + &down)))
}

/// Is the basis element normal (contains `e₀`)?
pub fn is_normal(mask: u32) -> bool {
    mask & 1 != 0
}

/// `B̄`: rows of `B` on normal basis elements, identity rows on tangential.
pub fn bar_forms(b: &Mat<C>, n: usize, k: usize) -> Mat<C> {
    let subsets = basis_subsets(n, k);
    Mat::from_fn(b.nrows(), b.ncols(), |i, j| {
        if is_normal(subsets[i]) {
            b[(i, j)]
        } else if i == j {
            cr(1.0)
        } else {
            ZERO
        }
    })
}

/// `B̲`: identity rows on normal basis elements, rows of `B` on tangential.
pub fn under_forms(b: &Mat<C>, n: usize, k: usize) -> Mat<C> {
    let subsets = basis_subsets(n, k);
    Mat::from_fn(b.nrows(), b.ncols(), |i, j| {
        if !is_normal(subsets[i]) {
            b[(i, j)]
        } else if i == j {
            cr(1.0)
        } else {
            ZERO
        }
    })
}

/// `B̂ = B̲ B̄⁻¹`, an involution on accretive coefficients.
pub fn hat_forms(b: &Mat<C>, n: usize, k: usize) -> Result<Mat<C>> {
    let bar = bar_forms(b, n, k);
    if linalg::sigma_min(&bar) < tol::SINGULAR_A00_REL * opnorm(b).max(1.0) {
        return Err(CoreError::SingularNormalBlock {
            min_sigma: linalg::sigma_min(&bar),
            scale: opnorm(b),
        });
    }
    Ok(&under_forms(b, n, k) * &inverse_refined(&bar))
}

/// The reduced constant-coefficient problem at one frequency.
pub struct FormsSymbol {
    pub n: usize,
    pub k: usize,
    pub xi: Vec<f64>,
    /// `D_ξ` on the full `Λᵏ`.
    pub dxi: Mat<C>,
    /// Orthonormal basis of `H^k_ξ` (columns).
    pub h_basis: Mat<C>,
    /// `T_ξ` compressed to `H^k_ξ`.
    pub t_reduced: Mat<C>,
    /// `T_ξ` on the full `Λᵏ`.
    pub t_full: Mat<C>,
}

/// Orthonormal null-space basis of a stacked constraint matrix, through the
/// Hermitian eigendecomposition of the Gram matrix `A*A` (robust under
/// degenerate singular values).
fn null_basis(a: &Mat<C>) -> Mat<C> {
    let ncols = a.ncols();
    if a.nrows() == 0 {
        return identity(ncols);
    }
    let gram = &adjoint(a) * a;
    let (vals, vecs) = linalg::eigh(&gram);
    let lmax = vals.last().copied().unwrap_or(0.0).max(0.0);
    // numerically-zero Gram eigenvalues land near ε·λmax; the constraint
    // spectra here have O(|ξ|²) gaps, so a relative cut is safe
    let thresh = 1e-12 * lmax.max(1e-300);
    let nullity = vals.iter().take_while(|&&l| l < thresh).count();
    Mat::from_fn(ncols, nullity, |i, j| vecs[(i, j)])
}

pub fn build_forms_symbol(b: &Mat<C>, n: usize, k: usize, xi: &[f64]) -> Result<FormsSymbol> {
    let dim = lambda_dim(n, k);
    if b.nrows() != dim || b.ncols() != dim {
        return Err(CoreError::DimensionMismatch(format!(
            "B must be {dim}×{dim} on Λ^{k}(R^{})",
            n + 1
        )));
    }
    if k == 0 || k > n {
        return Err(CoreError::DegreeOverflow { k, n });
    }
    if xi.iter().map(|v| v * v).sum::<f64>() == 0.0 {
        return Err(CoreError::ZeroFrequency);
    }
    let kappa = linalg::min_eig_hermitian_part(b);
    if kappa <= 0.0 {
        return Err(CoreError::NotAccretive { kappa });
    }
    let dxi = dxi_forms(xi, n, k)?;
    let xic = embed_tangential(xi);
    let e0c = e0(n);

    // H^k_ξ = {f : μ μ_ξ f = 0 = μ* μ*_ξ (Bf)}
    let up_rows = if k + 2 <= n + 1 {
        let mu_xi = wedge_matrix(&xic, n, k)?;
        let mu = wedge_matrix(&e0c, n, k + 1)?;
        &mu * &mu_xi
    } else {
        Mat::zeros(0, dim)
    };
    let down_rows = if k >= 2 {
        let mu_xi_star = interior_matrix(&xic, n, k - 1)?;
        let mu_star = interior_matrix(&e0c, n, k)?;
        &(&mu_xi_star * &mu_star) * b
    } else {
        Mat::zeros(0, dim)
    };
    let stacked = Mat::from_fn(up_rows.nrows() + down_rows.nrows(), dim, |i, j| {
        if i < up_rows.nrows() {
            up_rows[(i, j)]
        } else {
            down_rows[(i - up_rows.nrows(), j)]
        }
    });
    let h_basis = null_basis(&stacked);
    let expected = 2 * binomial(n - 1, k - 1);
    if h_basis.ncols() != expected {
        return Err(CoreError::DimensionMismatch(format!(
            "H^k_ξ has dimension {}, expected {expected}",
            h_basis.ncols()
        )));
    }

    let bar = bar_forms(b, n, k);
    if linalg::sigma_min(&bar) < tol::SINGULAR_A00_REL * opnorm(b).max(1.0) {
        return Err(CoreError::SingularNormalBlock {
            min_sigma: linalg::sigma_min(&bar),
            scale: opnorm(b),
        });
    }
    let t_full = &(&inverse_refined(&bar) * &dxi) * &under_forms(b, n, k);
    let t_reduced = &(&adjoint(&h_basis) * &t_full) * &h_basis;
    // H^k_ξ must be invariant under T_ξ
    let tw = &t_full * &h_basis;
    let proj_back = &h_basis * &t_reduced;
    let inv_res = opnorm(&(&tw - &proj_back));
    if inv_res > 1e-8 * opnorm(&t_full).max(1.0) {
        return Err(CoreError::InvalidInput(format!(
            "H^k_ξ is not invariant under T_ξ (residual {inv_res:.3e})"
        )));
    }
    Ok(FormsSymbol {
        n,
        k,
        xi: xi.to_vec(),
        dxi,
        h_basis,
        t_reduced,
        t_full,
    })
}

/// Max residual of `D_ξ² = |ξ|²` on the range of `D_ξ`.
pub fn dxi_square_residual(xi: &[f64], n: usize, k: usize) -> Result<f64> {
    let dxi = dxi_forms(xi, n, k)?;
    let r2: f64 = xi.iter().map(|v| v * v).sum();
    // D_ξ is Hermitian: its range is spanned by eigenvectors with |λ| > 0
    let (vals, vecs) = linalg::eigh(&dxi);
    let lmax = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let d2 = &dxi * &dxi;
    let mut worst: f64 = 0.0;
    for (j, &l) in vals.iter().enumerate() {
        if l.abs() <= 1e-10 * lmax.max(1e-300) {
            continue;
        }
        let v = Col::from_fn(dxi.nrows(), |i| vecs[(i, j)]);
        let d2v = &d2 * &v;
        let mut dev = 0.0;
        for i in 0..dxi.nrows() {
            dev += (d2v[i] - v[i] * cr(r2)).norm_sqr();
        }
        worst = worst.max(dev.sqrt() / r2);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FormsWhich {
    /// Tangential data `f∥ = g`, `d_x g = 0`.
    Tan,
    /// Conormal data `(Bf)⊥ = g`, `d*_x g = 0`.
    Nor,
}

impl std::fmt::Display for FormsWhich {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FormsWhich::Tan => "tan",
            FormsWhich::Nor => "nor",
        })
    }
}

#[derive(Debug, Clone)]
pub struct FormsSolveReport {
    pub which: FormsWhich,
    pub n: usize,
    pub k: usize,
    pub grid_size: usize,
    pub condition: f64,
    pub solution_norm: f64,
    pub t_levels: Vec<f64>,
    /// Boundary trace samples, point-major with `dim Λᵏ` components.
    pub trace: Vec<C>,
    pub slices: Vec<Vec<C>>,
    /// No windowed non-tangential norm for exterior systems.
    pub norms: NormBundle,
    pub residuals: Residuals,
}

/// Per-frequency restricted solve of (Tan-B)/(Nor-B) for constant `B`.
pub fn solve_forms_constant(
    b: &Mat<C>,
    n: usize,
    k: usize,
    which: FormsWhich,
    data: &[C],
    lattice: &FrequencyLattice,
    t_levels: &[f64],
) -> Result<FormsSolveReport> {
    let dim = lambda_dim(n, k);
    if lattice.n != n {
        return Err(CoreError::DimensionMismatch("lattice dimension".into()));
    }
    let p = lattice.num_points();
    if data.len() != p * dim {
        return Err(CoreError::DimensionMismatch("boundary data length".into()));
    }
    let data_hat = lattice.forward_unitary(data, dim);
    let data_norm = data_hat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let zero_norm = (0..dim).map(|c| data_hat[c].norm_sqr()).sum::<f64>().sqrt();
    if zero_norm > 1e-9 * data_norm.max(1e-300) {
        return Err(CoreError::ZeroMeanViolation { mean: zero_norm });
    }

    let subsets = basis_subsets(n, k);
    struct FreqSolve {
        values: Vec<C>,
        vectors: Mat<C>,
        coeffs: Vec<C>,
        basis: Mat<C>,
    }
    let mut solves: Vec<Option<FreqSolve>> = Vec::with_capacity(p);
    let mut worst_cond: f64 = 0.0;
    let mut worst_sol: f64 = 0.0;
    for kf in 0..p {
        let r = lattice.freq_norm(kf);
        if r == 0.0 {
            solves.push(None);
            continue;
        }
        let xi = lattice.freq_f64(kf);
        let sym = build_forms_symbol(b, n, k, &xi)?;
        let (pplus, _) = half_plane_projections(&sym.t_reduced)?;
        let hdim = sym.h_basis.ncols();
        let rank = hdim / 2;
        // orthonormal basis of range(χ₊) in the reduced coordinates
        let q_red = {
            let e = linalg::eig(&sym.t_reduced);
            let idx: Vec<usize> = (0..hdim).filter(|&i| e.values[i].re > 0.0).collect();
            let cols = Mat::from_fn(hdim, idx.len(), |i, j| e.vectors[(i, idx[j])]);
            linalg::orthonormalize(&cols)
        };
        let _ = pplus;
        let q_full = &sym.h_basis * &q_red;

        // target data subspace at this frequency
        let xic = embed_tangential(&xi);
        let target_basis: Mat<C> = match which {
            FormsWhich::Tan => {
                // tangential, ξ∧g = 0
                let mu_xi = wedge_matrix(&xic, n, k)?;
                let normal_rows: Vec<usize> = (0..dim).filter(|&i| is_normal(subsets[i])).collect();
                let stacked = Mat::from_fn(mu_xi.nrows() + normal_rows.len(), dim, |i, j| {
                    if i < mu_xi.nrows() {
                        mu_xi[(i, j)]
                    } else if normal_rows[i - mu_xi.nrows()] == j {
                        cr(1.0)
                    } else {
                        ZERO
                    }
                });
                null_basis(&stacked)
            }
            FormsWhich::Nor => {
                // normal, ξ⌟g = 0
                let mu_xi_star = interior_matrix(&xic, n, k)?;
                let tangential_rows: Vec<usize> =
                    (0..dim).filter(|&i| !is_normal(subsets[i])).collect();
                let stacked =
                    Mat::from_fn(mu_xi_star.nrows() + tangential_rows.len(), dim, |i, j| {
                        if i < mu_xi_star.nrows() {
                            mu_xi_star[(i, j)]
                        } else if tangential_rows[i - mu_xi_star.nrows()] == j {
                            cr(1.0)
                        } else {
                            ZERO
                        }
                    });
                null_basis(&stacked)
            }
        };
        if target_basis.ncols() != rank {
            return Err(CoreError::DimensionMismatch(format!(
                "data subspace dimension {} (expected {rank})",
                target_basis.ncols()
            )));
        }
        // constraint check on the data
        let g_local = Col::from_fn(dim, |i| data_hat[kf * dim + i]);
        let proj = &target_basis * &(&adjoint(&target_basis) * &g_local);
        let mut ortho = 0.0;
        for i in 0..dim {
            ortho += (g_local[i] - proj[i]).norm_sqr();
        }
        if ortho.sqrt() > 1e-8 * data_norm.max(1e-300) {
            return Err(CoreError::ConstraintViolation {
                what: match which {
                    FormsWhich::Tan => "closed tangential".into(),
                    FormsWhich::Nor => "coclosed conormal".into(),
                },
                residual: ortho.sqrt(),
            });
        }

        // trace map: f ↦ f∥ or (Bf)⊥ compressed to the target coordinates
        let extract: Mat<C> = match which {
            FormsWhich::Tan => Mat::from_fn(dim, dim, |i, j| {
                if i == j && !is_normal(subsets[i]) {
                    cr(1.0)
                } else {
                    ZERO
                }
            }),
            FormsWhich::Nor => {
                let pn = Mat::from_fn(dim, dim, |i, j| {
                    if i == j && is_normal(subsets[i]) {
                        cr(1.0)
                    } else {
                        ZERO
                    }
                });
                &pn * b
            }
        };
        let mmat = &(&adjoint(&target_basis) * &extract) * &q_full;
        let sv = mmat.singular_values();
        let (smax, smin) = (sv[0], *sv.last().unwrap());
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !cond.is_finite() || cond > tol::WP_COND_LIMIT {
            return Err(CoreError::WellPosednessFailure { cond });
        }
        worst_cond = worst_cond.max(cond);
        worst_sol = worst_sol.max(1.0 / smin);

        let rhs = Mat::from_fn(rank, 1, |i, _| {
            let mut s = ZERO;
            for j in 0..dim {
                s += target_basis[(j, i)].conj() * g_local[j];
            }
            s
        });
        let cvec = linalg::lstsq(&mmat, &rhs);
        let f_red = Col::from_fn(hdim, |i| {
            let mut s = ZERO;
            for j in 0..rank {
                s += q_red[(i, j)] * cvec[(j, 0)];
            }
            s
        });
        let e = linalg::eig(&sym.t_reduced);
        let mut coeffs = vec![ZERO; hdim];
        for i in 0..hdim {
            let mut s = ZERO;
            for j in 0..hdim {
                s += e.vectors_inv[(i, j)] * f_red[j];
            }
            coeffs[i] = if e.values[i].re > 0.0 { s } else { ZERO };
        }
        solves.push(Some(FreqSolve {
            values: e.values,
            vectors: e.vectors,
            coeffs,
            basis: sym.h_basis,
        }));
    }

    let freq_field_at = |t: f64| -> Vec<C> {
        let mut out = vec![ZERO; p * dim];
        for (kf, s) in solves.iter().enumerate() {
            if let Some(fs) = s {
                let hdim = fs.values.len();
                let red = Col::from_fn(hdim, |i| {
                    let mut acc = ZERO;
                    for j in 0..hdim {
                        if fs.coeffs[j] != ZERO {
                            acc += fs.vectors[(i, j)]
                                * ((-fs.values[j] * cr(t)).exp() * fs.coeffs[j]);
                        }
                    }
                    acc
                });
                let full = &fs.basis * &red;
                for i in 0..dim {
                    out[kf * dim + i] = full[i];
                }
            }
        }
        out
    };

    let trace_hat = freq_field_at(0.0);
    let trace = lattice.inverse_unitary(&trace_hat, dim);
    let slices: Vec<Vec<C>> = t_levels
        .iter()
        .map(|&t| lattice.inverse_unitary(&freq_field_at(t), dim))
        .collect();

    let phys = (2.0 * std::f64::consts::PI / lattice.size as f64)
        .powi(n as i32)
        .sqrt();
    let l2_of_hat = |v: &[C]| phys * v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let trace_norm = l2_of_hat(&trace_hat);
    let t_grid = crate::symbol::log_t_grid(lattice, t_levels);
    let mut sup_norm = trace_norm;
    for &t in &t_grid {
        sup_norm = sup_norm.max(l2_of_hat(&freq_field_at(t)));
    }
    let mut sq2 = 0.0;
    for s in solves.iter().flatten() {
        let hdim = s.values.len();
        for i in 0..hdim {
            for j in 0..hdim {
                if s.coeffs[i] == ZERO || s.coeffs[j] == ZERO {
                    continue;
                }
                let mut gram = ZERO;
                for r_ in 0..hdim {
                    gram += s.vectors[(r_, i)].conj() * s.vectors[(r_, j)];
                }
                let li = s.values[i];
                let lj = s.values[j];
                let kern = li.conj() * lj / ((li.conj() + lj) * (li.conj() + lj));
                sq2 += (s.coeffs[i].conj() * s.coeffs[j] * gram * kern).re;
            }
        }
    }
    let square_function = phys * sq2.max(0.0).sqrt();

    // residuals
    let f_norm = trace_hat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut pde = 0.0f64;
    for &t in t_levels {
        let mut num2 = 0.0;
        for s in solves.iter().flatten() {
            let hdim = s.values.len();
            for i in 0..hdim {
                let mut resid = ZERO;
                for j in 0..hdim {
                    if s.coeffs[j] != ZERO {
                        let amp = s.vectors[(i, j)] * (-s.values[j] * cr(t)).exp() * s.coeffs[j];
                        resid += -s.values[j] * amp + s.values[j] * amp;
                    }
                }
                num2 += resid.norm_sqr();
            }
        }
        pde = pde.max(num2.sqrt() / f_norm.max(1e-300));
    }
    let boundary = {
        let mut num2 = 0.0;
        let mut den2 = 0.0;
        for kf in 0..p {
            if lattice.freq_norm(kf) == 0.0 {
                continue;
            }
            let fv = Col::from_fn(dim, |i| trace_hat[kf * dim + i]);
            let got: Col<C> = match which {
                FormsWhich::Tan => Col::from_fn(dim, |i| {
                    if !is_normal(subsets[i]) {
                        fv[i]
                    } else {
                        ZERO
                    }
                }),
                FormsWhich::Nor => {
                    let bf = b * &fv;
                    Col::from_fn(dim, |i| if is_normal(subsets[i]) { bf[i] } else { ZERO })
                }
            };
            for i in 0..dim {
                num2 += (got[i] - data_hat[kf * dim + i]).norm_sqr();
                den2 += data_hat[kf * dim + i].norm_sqr();
            }
        }
        if den2 > 0.0 {
            (num2 / den2).sqrt()
        } else {
            0.0
        }
    };

    Ok(FormsSolveReport {
        which,
        n,
        k,
        grid_size: lattice.size,
        condition: worst_cond,
        solution_norm: worst_sol,
        t_levels: t_levels.to_vec(),
        trace,
        slices,
        norms: NormBundle {
            trace_norm,
            sup_norm,
            square_function,
            ntmax: None,
        },
        residuals: Residuals {
            pde,
            boundary,
            rellich: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientField;
    use crate::report::BvpKind;
    use crate::sampling;
    use crate::symbol::{build_symbol, hardy_symbol_projections, BoundaryData};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dimensions_and_normal_split() {
        for n in 1..=4usize {
            for k in 0..=(n + 1) {
                assert_eq!(lambda_dim(n, k), binomial(n + 1, k));
                let subsets = basis_subsets(n, k);
                let normal = subsets.iter().filter(|&&s| is_normal(s)).count();
                let tangential = subsets.len() - normal;
                assert_eq!(normal, if k >= 1 { binomial(n, k - 1) } else { 0 });
                assert_eq!(tangential, binomial(n, k));
            }
        }
    }

    #[test]
    fn wedge_and_interior_basis_actions() {
        // e₀ ∧ e₁ = e₀₁ and e₀ ⌟ e₀₁ = e₁
        let n = 2;
        let e0v = e0(n);
        let w = wedge_matrix(&e0v, n, 1).unwrap();
        let from = basis_subsets(n, 1);
        let to = basis_subsets(n, 2);
        let i_e1 = from.iter().position(|&s| s == 0b010).unwrap();
        let i_e01 = to.iter().position(|&s| s == 0b011).unwrap();
        assert!((w[(i_e01, i_e1)] - cr(1.0)).abs() < 1e-15);
        let inter = interior_matrix(&e0v, n, 2).unwrap();
        assert!((inter[(i_e1, i_e01)] - cr(1.0)).abs() < 1e-15);
    }

    #[test]
    fn wedge_is_nilpotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        for _ in 0..20 {
            let n = 3;
            let v: Vec<C> = (0..n + 1)
                .map(|_| C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let k = 1;
            let w1 = wedge_matrix(&v, n, k).unwrap();
            let w2 = wedge_matrix(&v, n, k + 1).unwrap();
            assert!(opnorm(&(&w2 * &w1)) < 1e-14);
        }
    }

    #[test]
    fn adjointness_for_real_vectors() {
        // (v∧f, g) = (f, v⌟g): the interior matrix is the transpose of the
        // wedge matrix for real v.
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        for _ in 0..20 {
            let n = 3;
            let k = 2;
            let v: Vec<f64> = (0..n + 1).map(|_| rng.gen::<f64>() - 0.5).collect();
            let vc: Vec<C> = v.iter().map(|&x| cr(x)).collect();
            let w = wedge_matrix(&vc, n, k).unwrap();
            let inter = interior_matrix(&vc, n, k + 1).unwrap();
            assert!(opnorm(&(&inter - &w.transpose().to_owned())) < 1e-14);
        }
    }

    #[test]
    fn anticommutators_unit_and_orthogonal() {
        let n = 3;
        // v = w = e₀: μμ* + μ*μ = I
        let e0r = {
            let mut v = vec![0.0; n + 1];
            v[0] = 1.0;
            v
        };
        for k in 0..=n {
            let (r1, r2) = anticommutator_residuals(&e0r, &e0r, n, k).unwrap();
            assert!(r1 < 1e-14 && r2 < 1e-14, "k={k}");
        }
        // orthogonal vectors: the scalar term vanishes
        let mut e1r = vec![0.0; n + 1];
        e1r[1] = 1.0;
        let (r1, r2) = anticommutator_residuals(&e0r, &e1r, n, 2).unwrap();
        assert!(r1 < 1e-14 && r2 < 1e-14);
    }

    #[test]
    fn anticommutators_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        for _ in 0..30 {
            let n = 3;
            let k = 2;
            let v: Vec<f64> = (0..n + 1).map(|_| rng.gen::<f64>() - 0.5).collect();
            let w: Vec<f64> = (0..n + 1).map(|_| rng.gen::<f64>() - 0.5).collect();
            let (r1, r2) = anticommutator_residuals(&v, &w, n, k).unwrap();
            assert!(r1 < 1e-13 && r2 < 1e-13);
        }
    }

    #[test]
    fn dxi_reduces_to_the_vector_symbol_for_k1() {
        // Λ¹ basis in colex order is {e₀, e₁, …, e_n}, matching the m = 1
        // vector coordinates.
        let n = 2;
        let xi = [3.0, -1.0];
        let d_forms = dxi_forms(&xi, n, 1).unwrap();
        let a = CoefficientField::constant(n, 1, identity(n + 1)).unwrap();
        let sp = build_symbol(&a, &xi).unwrap();
        // embed the reduced 2×2 D_ξ into Λ¹ coordinates via {e₀, ξ̂}
        let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        let emb = Mat::from_fn(n + 1, 2, |i, j| match (i, j) {
            (0, 0) => cr(1.0),
            (i, 1) if i >= 1 => cr(xi[i - 1] / r),
            _ => ZERO,
        });
        let lifted = &(&emb * &sp.dxi) * &adjoint(&emb);
        assert!(opnorm(&(&d_forms - &lifted)) < 1e-13);
    }

    #[test]
    fn h_space_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(127);
        // n=2, k=1, ξ=(1,0): dim H¹_ξ = 2
        let b = identity(lambda_dim(2, 1));
        let sym = build_forms_symbol(&b, 2, 1, &[1.0, 0.0]).unwrap();
        assert_eq!(sym.h_basis.ncols(), 2);
        // n=3, k=2, random ξ: dim H²_ξ = 4 = 2·C(2,1)
        let b = identity(lambda_dim(3, 2));
        let xi: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() - 0.3).collect();
        let sym = build_forms_symbol(&b, 3, 2, &xi).unwrap();
        assert_eq!(sym.h_basis.ncols(), 4);
    }

    #[test]
    fn dxi_squares_to_xi_norm_on_its_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        for n in 1..=4usize {
            for k in 1..=n.min(3) {
                for _ in 0..5 {
                    let xi: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.4).collect();
                    if xi.iter().map(|v| v * v).sum::<f64>() < 1e-3 {
                        continue;
                    }
                    let res = dxi_square_residual(&xi, n, k).unwrap();
                    assert!(res < 1e-12, "n={n} k={k}: {res}");
                }
            }
        }
    }

    #[test]
    fn hat_forms_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(137);
        for _ in 0..10 {
            let (n, k) = (3, 2);
            let dim = lambda_dim(n, k);
            let g = sampling::random_direction(&mut rng, dim);
            let b = &identity(dim) + &scale(cr(0.55), &g);
            let hh = hat_forms(&hat_forms(&b, n, k).unwrap(), n, k).unwrap();
            assert!(opnorm(&(&hh - &b)) < 1e-12 * opnorm(&b));
        }
    }

    #[test]
    fn block_b_symbol_anticommutes_with_the_reflection() {
        // block B (normal/tangential diagonal): sgn of the reduced symbol
        // anticommutes with the normal reflection, giving explicit inverses
        // 2χ₊ for the trace maps.
        let mut rng = ChaCha8Rng::seed_from_u64(139);
        let (n, k) = (3, 2);
        let dim = lambda_dim(n, k);
        let subsets = basis_subsets(n, k);
        let bn = sampling::random_direction(&mut rng, dim);
        let b = Mat::from_fn(dim, dim, |i, j| {
            let same = is_normal(subsets[i]) == is_normal(subsets[j]);
            let base = if i == j { cr(1.0) } else { ZERO };
            if same {
                base + bn[(i, j)] * cr(0.4)
            } else {
                ZERO
            }
        });
        let xi = [0.3, -0.8, 0.5];
        let sym = build_forms_symbol(&b, n, k, &xi).unwrap();
        let (pp, pm) = half_plane_projections(&sym.t_reduced).unwrap();
        let sgn_red = &pp - &pm;
        let sgn_full = &(&sym.h_basis * &sgn_red) * &adjoint(&sym.h_basis);
        let nref = Mat::from_fn(dim, dim, |i, j| {
            if i != j {
                ZERO
            } else if is_normal(subsets[i]) {
                cr(-1.0)
            } else {
                cr(1.0)
            }
        });
        // compare on H^k_ξ (the reflection preserves it for block B)
        let anti = &(&(&nref * &sgn_full) + &(&sgn_full * &nref)) * &sym.h_basis;
        assert!(opnorm(&anti) < 1e-10, "anticommutator {}", opnorm(&anti));
        // explicit inverse: N⁺(2χ₊ g) = g for tangential g in H^k_ξ
        let two_chi = scale(cr(2.0), &(&sym.h_basis * &(&pp * &adjoint(&sym.h_basis))));
        let ptan = Mat::from_fn(dim, dim, |i, j| {
            if i == j && !is_normal(subsets[i]) {
                cr(1.0)
            } else {
                ZERO
            }
        });
        // tangential part of H^k_ξ
        let htan = &ptan * &sym.h_basis;
        for j in 0..sym.h_basis.ncols() {
            let g = Col::from_fn(dim, |i| htan[(i, j)]);
            if linalg::col_norm(&g) < 1e-8 {
                continue;
            }
            let lifted = &two_chi * &g;
            let back = &ptan * &lifted;
            let mut dev = 0.0;
            for i in 0..dim {
                dev += (back[i] - g[i]).norm_sqr();
            }
            assert!(dev.sqrt() < 1e-10 * linalg::col_norm(&g));
        }
    }

    #[test]
    fn k1_solve_reproduces_the_vector_solver() {
        // (Tan-B) at k=1 is the regularity problem; (Nor-B) the Neumann one.
        let n = 1;
        let size = 16;
        let lattice = FrequencyLattice::new(n, size).unwrap();
        let b = identity(lambda_dim(n, 1));
        let a = CoefficientField::constant(n, 1, identity(n + 1)).unwrap();
        // tangential closed data: g = (-sin x)·e₁
        let mut data = vec![ZERO; size * 2];
        for j in 0..size {
            let x = 2.0 * std::f64::consts::PI * j as f64 / size as f64;
            data[j * 2 + 1] = cr(-x.sin());
        }
        let rep = solve_forms_constant(&b, n, 1, FormsWhich::Tan, &data, &lattice, &[0.5])
            .unwrap();
        let grad: Vec<C> = (0..size)
            .map(|j| cr(-(2.0 * std::f64::consts::PI * j as f64 / size as f64).sin()))
            .collect();
        let vec_rep = crate::symbol::solve_constant(
            &a,
            BvpKind::Reg,
            BoundaryData::Tangential(&grad),
            &lattice,
            &[0.5],
        )
        .unwrap();
        // identical traces and slices (Λ¹ ≅ C^{1+n} component-wise)
        for i in 0..size * 2 {
            assert!((rep.trace[i] - vec_rep.trace[i]).abs() < 1e-12);
            assert!((rep.slices[0][i] - vec_rep.slices[0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitean_forms_maps_stay_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(149);
        let (n, k) = (3, 2);
        let dim = lambda_dim(n, k);
        for _ in 0..5 {
            let g = sampling::random_matrix(&mut rng, dim, dim);
            let h = scale(cr(0.5), &(&g + &adjoint(&g)));
            let b = &identity(dim) + &scale(cr(0.55 / opnorm(&h)), &h);
            for xi in crate::symbol::unit_directions(n, 8) {
                let sym = build_forms_symbol(&b, n, k, &xi).unwrap();
                let e = linalg::eig(&sym.t_reduced);
                for l in e.values {
                    assert!(l.re.abs() > 1e-8);
                }
            }
        }
    }

    #[test]
    fn degree_bounds_are_enforced() {
        assert!(matches!(
            build_forms_symbol(&identity(1), 2, 0, &[1.0, 0.0]),
            Err(CoreError::DegreeOverflow { .. })
        ));
        assert!(matches!(
            build_forms_symbol(&identity(lambda_dim(2, 1)), 2, 1, &[0.0, 0.0]),
            Err(CoreError::ZeroFrequency)
        ));
    }
}

