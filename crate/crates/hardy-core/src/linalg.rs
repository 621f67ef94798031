//! Dense complex linear algebra helpers on top of `faer`.
//!
//! Everything in this crate works with `faer::Mat<c64>` / `faer::Col<c64>`.
//! This module adds the pieces used throughout: refined inverses, general
//! complex eigendecompositions with classified conditioning, Hermitian
//! eigensolves, condition numbers, least squares, and the matrix sign /
//! square-root iterations used as independent oracles and fallbacks.

use faer::complex_native::c64;
use faer::prelude::{SpSolver, SpSolverLstsq};
use faer::{Col, Mat};

pub type C = c64;

pub const ONE: C = C { re: 1.0, im: 0.0 };
pub const ZERO: C = C { re: 0.0, im: 0.0 };
pub const I: C = C { re: 0.0, im: 1.0 };

pub fn cr(re: f64) -> C {
    C::new(re, 0.0)
}

pub fn identity(n: usize) -> Mat<C> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn adjoint(m: &Mat<C>) -> Mat<C> {
    m.adjoint().to_owned()
}

pub fn scale(z: C, m: &Mat<C>) -> Mat<C> {
    faer::scale(z) * m
}

pub fn frobenius(m: &Mat<C>) -> f64 {
    m.norm_l2()
}

pub fn col_norm(v: &Col<C>) -> f64 {
    v.norm_l2()
}

pub fn inner(x: &Col<C>, y: &Col<C>) -> C {
    // (x, y) = y* x, conjugate-linear in the second argument.
    let mut s = ZERO;
    for i in 0..x.nrows() {
        s += x[i] * y[i].conj();
    }
    s
}

/// Largest singular value (operator 2-norm).
pub fn opnorm(m: &Mat<C>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let sv = m.singular_values();
    sv[0]
}

/// Smallest singular value.
pub fn sigma_min(m: &Mat<C>) -> f64 {
    let sv = m.singular_values();
    *sv.last().unwrap_or(&0.0)
}

/// 2-norm condition number σ_max/σ_min; `f64::INFINITY` when singular.
pub fn cond2(m: &Mat<C>) -> f64 {
    let sv = m.singular_values();
    let (mx, mn) = (sv[0], *sv.last().unwrap());
    if mn == 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

pub fn solve(a: &Mat<C>, rhs: &Mat<C>) -> Mat<C> {
    a.partial_piv_lu().solve(rhs)
}

pub fn solve_col(a: &Mat<C>, rhs: &Col<C>) -> Col<C> {
    let r = Mat::from_fn(rhs.nrows(), 1, |i, _| rhs[i]);
    let x = a.partial_piv_lu().solve(&r);
    Col::from_fn(rhs.nrows(), |i| x[(i, 0)])
}

/// Least-squares solve through a QR factorization (square or tall `a`).
pub fn lstsq(a: &Mat<C>, rhs: &Mat<C>) -> Mat<C> {
    a.qr().solve_lstsq(rhs)
}

/// Inverse with one Newton refinement step `X ← X(2I − AX)`.
///
/// The refinement squares the residual of the LU inverse, which keeps
/// spectral-projection algebra (sums of `V D V⁻¹` products) near machine
/// precision even for moderately conditioned eigenvector matrices.
pub fn inverse_refined(a: &Mat<C>) -> Mat<C> {
    let n = a.nrows();
    let lu = a.partial_piv_lu();
    let mut x = lu.solve(&identity(n));
    for _ in 0..2 {
        let ax = a * &x;
        let two_minus = &scale(cr(2.0), &identity(n)) - &ax;
        x = &x * &two_minus;
    }
    x
}

/// General complex eigendecomposition `A V = V diag(λ)`.
pub struct Eig {
    pub values: Vec<C>,
    pub vectors: Mat<C>,
    pub vectors_inv: Mat<C>,
    /// Condition number of the eigenvector matrix.
    pub vcond: f64,
}

pub fn eig(a: &Mat<C>) -> Eig {
    let n = a.nrows();
    let evd = a.eigendecomposition::<C>();
    let u = evd.u().to_owned();
    let s = evd.s().column_vector();
    let values: Vec<C> = (0..n).map(|i| s[i]).collect();
    // Normalize eigenvector columns; improves the conditioning estimate.
    let mut vectors = u;
    for j in 0..n {
        let mut nrm = 0.0;
        for i in 0..n {
            nrm += vectors[(i, j)].norm_sqr();
        }
        let nrm = nrm.sqrt();
        if nrm > 0.0 {
            for i in 0..n {
                vectors[(i, j)] = vectors[(i, j)] * cr(1.0 / nrm);
            }
        }
    }
    let vcond = cond2(&vectors);
    let vectors_inv = inverse_refined(&vectors);
    Eig {
        values,
        vectors,
        vectors_inv,
        vcond,
    }
}

/// Hermitian eigendecomposition; returns ascending eigenvalues and an
/// orthonormal eigenbasis.
pub fn eigh(a: &Mat<C>) -> (Vec<f64>, Mat<C>) {
    let n = a.nrows();
    let ed = a.selfadjoint_eigendecomposition(faer::Side::Lower);
    let u = ed.u().to_owned();
    let s = ed.s().column_vector();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| s[i].re.partial_cmp(&s[j].re).unwrap());
    let values: Vec<f64> = idx.iter().map(|&i| s[i].re).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, idx[j])]);
    (values, vectors)
}

/// Smallest eigenvalue of the Hermitian part `(M + M*)/2`.
pub fn min_eig_hermitian_part(m: &Mat<C>) -> f64 {
    let h = scale(cr(0.5), &(m + &adjoint(m)));
    let (vals, _) = eigh(&h);
    vals[0]
}

/// Angle of the numerical range of an accretive matrix: the smallest φ with
/// `{(Mf,f)} ⊂ {|arg z| ≤ φ}`, computed from the Hermitian/skew-Hermitian
/// pencil as `atan ρ(H^{-1/2} K H^{-1/2})`.
///
/// Returns `None` when the Hermitian part is not positive definite.
pub fn numerical_range_angle(m: &Mat<C>) -> Option<f64> {
    let n = m.nrows();
    if n == 0 {
        return Some(0.0);
    }
    let h = scale(cr(0.5), &(m + &adjoint(m)));
    let k = scale(C::new(0.0, -0.5), &(m - &adjoint(m)));
    let (hvals, hvecs) = eigh(&h);
    if hvals[0] <= 0.0 {
        return None;
    }
    let hinv_sqrt = {
        let d = Mat::from_fn(n, n, |i, j| {
            if i == j {
                cr(1.0 / hvals[i].sqrt())
            } else {
                ZERO
            }
        });
        &(&hvecs * &d) * &adjoint(&hvecs)
    };
    let g = &(&hinv_sqrt * &k) * &hinv_sqrt;
    let (gvals, _) = eigh(&g);
    let rho = gvals
        .iter()
        .fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    Some(rho.atan())
}

/// Matrix sign function by the scaled Newton iteration
/// `X ← (cX + (cX)⁻¹)/2`; requires no eigenvalues on the imaginary axis.
pub fn sign_newton(a: &Mat<C>) -> Mat<C> {
    let n = a.nrows();
    let mut x = a.clone();
    for _ in 0..100 {
        let xinv = inverse_refined(&x);
        // Frobenius scaling accelerates convergence without a determinant.
        let c = (frobenius(&xinv) / frobenius(&x)).sqrt();
        let next = &scale(cr(0.5 * c), &x) + &scale(cr(0.5 / c), &xinv);
        let delta = frobenius(&(&next - &x)) / frobenius(&next).max(1e-300);
        x = next;
        if delta < 1e-14 {
            break;
        }
    }
    // One unscaled polishing step.
    let xinv = inverse_refined(&x);
    x = &scale(cr(0.5), &x) + &scale(cr(0.5), &xinv);
    let _ = n;
    x
}

/// Principal matrix square root by the Denman–Beavers iteration.
pub fn sqrtm_denman_beavers(a: &Mat<C>) -> Mat<C> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = identity(n);
    for _ in 0..100 {
        let yinv = inverse_refined(&y);
        let zinv = inverse_refined(&z);
        let y_next = &scale(cr(0.5), &y) + &scale(cr(0.5), &zinv);
        let z_next = &scale(cr(0.5), &z) + &scale(cr(0.5), &yinv);
        let delta = frobenius(&(&y_next - &y)) / frobenius(&y_next).max(1e-300);
        y = y_next;
        z = z_next;
        if delta < 5e-15 {
            break;
        }
    }
    y
}

/// Orthonormal basis of the column span (QR through a Gram–Schmidt pass with
/// reorthogonalization; the inputs here are far from rank deficient).
pub fn orthonormalize(cols: &Mat<C>) -> Mat<C> {
    let (n, k) = (cols.nrows(), cols.ncols());
    let mut q: Vec<Col<C>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v = Col::from_fn(n, |i| cols[(i, j)]);
        for _pass in 0..2 {
            for u in &q {
                let proj = inner(&v, u);
                for i in 0..n {
                    v[i] -= proj * u[i];
                }
            }
        }
        let nrm = col_norm(&v);
        if nrm > 1e-300 {
            for i in 0..n {
                v[i] = v[i] * cr(1.0 / nrm);
            }
        }
        q.push(v);
    }
    Mat::from_fn(n, k, |i, j| q[j][i])
}

/// Distance from a point to the closed double sector `S_ω` around the real
/// axis with half-angle `ω`.
pub fn dist_to_double_sector(lambda: C, omega: f64) -> f64 {
    let r = lambda.abs();
    if r == 0.0 {
        return 0.0;
    }
    let dist_half = |theta: f64| -> f64 {
        // distance to the closed sector {|arg z| <= omega}
        let t = theta.abs();
        if t <= omega {
            0.0
        } else if t - omega >= std::f64::consts::FRAC_PI_2 {
            r
        } else {
            r * (t - omega).sin()
        }
    };
    let th = lambda.arg();
    let th_neg = (-lambda).arg();
    dist_half(th).min(dist_half(th_neg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize) -> Mat<C> {
        Mat::from_fn(n, n, |i, j| {
            let d = if i == j { 3.0 } else { 0.0 };
            C::new(
                d + ((i * 31 + j * 17) % 23) as f64 / 23.0 - 0.5,
                ((i * 13 + j * 7) % 19) as f64 / 19.0 - 0.5,
            )
        })
    }

    #[test]
    fn refined_inverse_hits_machine_precision() {
        let a = test_matrix(40);
        let x = inverse_refined(&a);
        let r = &(&a * &x) - &identity(40);
        assert!(frobenius(&r) < 1e-13);
    }

    #[test]
    fn eig_reconstructs() {
        let a = test_matrix(30);
        let e = eig(&a);
        let d = Mat::from_fn(30, 30, |i, j| if i == j { e.values[i] } else { ZERO });
        let rec = &(&e.vectors * &d) * &e.vectors_inv;
        assert!(frobenius(&(&rec - &a)) / frobenius(&a) < 1e-12);
    }

    #[test]
    fn sign_newton_is_involutive() {
        let a = test_matrix(16);
        let s = sign_newton(&a);
        let r = &(&s * &s) - &identity(16);
        assert!(frobenius(&r) < 1e-11, "sign^2 - I = {}", frobenius(&r));
    }

    #[test]
    fn denman_beavers_squares_back() {
        let a = test_matrix(12);
        // use a*a so the principal root is well defined away from the cut
        let b = &a * &a;
        let s = sqrtm_denman_beavers(&b);
        let r = &(&s * &s) - &b;
        assert!(frobenius(&r) / frobenius(&b) < 1e-11);
    }

    #[test]
    fn numerical_range_angle_of_hermitian_is_zero() {
        let a = test_matrix(10);
        let h = &a + &adjoint(&a);
        let ang = numerical_range_angle(&(&h + &scale(cr(8.0), &identity(10)))).unwrap();
        assert!(ang < 1e-12);
    }

    #[test]
    fn sector_distance_geometry() {
        // point on the imaginary axis, sector = real axis
        assert!((dist_to_double_sector(C::new(0.0, 2.0), 0.0) - 2.0).abs() < 1e-15);
        // point inside the sector
        assert_eq!(dist_to_double_sector(C::new(-1.0, 0.0), 0.3), 0.0);
        // 45° sector, point at 90°
        let d = dist_to_double_sector(C::new(0.0, 1.0), std::f64::consts::FRAC_PI_4);
        assert!((d - (std::f64::consts::FRAC_PI_4).sin()).abs() < 1e-15);
    }
}
