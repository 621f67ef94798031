//! Seeded generators of random test data (coefficients, vectors).
//!
//! Everything is driven by an explicit RNG so that the property suites and
//! the command-line self test are reproducible bit for bit.

use faer::{Col, Mat};
use rand::Rng;

use crate::coefficients::CoefficientField;
use crate::linalg::{adjoint, cr, identity, opnorm, scale, C};

pub fn random_col<R: Rng>(rng: &mut R, n: usize) -> Col<C> {
    Col::from_fn(n, |_| C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Mat<C> {
    Mat::from_fn(rows, cols, |_, _| {
        C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    })
}

/// Random direction of unit operator norm.
pub fn random_direction<R: Rng>(rng: &mut R, dim: usize) -> Mat<C> {
    let g = random_matrix(rng, dim, dim);
    scale(cr(1.0 / opnorm(&g)), &g)
}

/// `I + s·G` with the scale chosen so the pointwise Hermitian part stays
/// ≥ `margin`.
pub fn random_accretive_constant<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    margin: f64,
) -> CoefficientField {
    let dim = (1 + n) * m;
    let g = random_direction(rng, dim);
    let a = &identity(dim) + &scale(cr(1.0 - margin), &g);
    CoefficientField::constant(n, m, a).expect("valid constant field")
}

/// Random Hermitean strictly accretive constant coefficients.
pub fn random_hermitean_constant<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    margin: f64,
) -> CoefficientField {
    let dim = (1 + n) * m;
    let g = random_matrix(rng, dim, dim);
    let h = scale(cr(0.5), &(&g + &adjoint(&g)));
    let h = scale(cr((1.0 - margin) / opnorm(&h)), &h);
    let a = &identity(dim) + &h;
    CoefficientField::constant(n, m, a).expect("valid constant field")
}

/// Band-limited grid field `I + (sin x₁·G₁ + cos x₁·G₂ + …)` with pointwise
/// Hermitian part ≥ `margin`; only frequencies ±1 per axis are excited, so
/// the same field is exactly representable on every finer grid.
pub fn random_accretive_grid<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    size: usize,
    margin: f64,
) -> CoefficientField {
    let dim = (1 + n) * m;
    let dirs: Vec<Mat<C>> = (0..2 * n).map(|_| random_direction(rng, dim)).collect();
    let total = size.pow(n as u32);
    let h = 2.0 * std::f64::consts::PI / size as f64;
    let amp = (1.0 - margin) / (2 * n) as f64;
    let samples: Vec<Mat<C>> = (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut acc = identity(dim);
            for ax in (0..n).rev() {
                let x = (rem % size) as f64 * h;
                rem /= size;
                acc = &acc + &scale(cr(amp * x.sin()), &dirs[2 * ax]);
                acc = &acc + &scale(cr(amp * x.cos()), &dirs[2 * ax + 1]);
            }
            acc
        })
        .collect();
    CoefficientField::grid(n, m, size, samples).expect("valid grid field")
}

/// Hermitean variant of [`random_accretive_grid`].
pub fn random_hermitean_grid<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    size: usize,
    margin: f64,
) -> CoefficientField {
    let a = random_accretive_grid(rng, n, m, size, margin);
    let samples: Vec<Mat<C>> = a
        .samples()
        .iter()
        .map(|s| scale(cr(0.5), &(s + &adjoint(s))))
        .collect();
    CoefficientField::grid(n, m, size, samples).expect("valid grid field")
}

/// Random block-form grid field (zero off-diagonal blocks, accretive
/// diagonal blocks), band-limited like [`random_accretive_grid`].
pub fn random_block_grid<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    size: usize,
    margin: f64,
) -> CoefficientField {
    let dim = (1 + n) * m;
    let g00: Vec<Mat<C>> = (0..2).map(|_| random_direction(rng, m)).collect();
    let gtt: Vec<Mat<C>> = (0..2).map(|_| random_direction(rng, n * m)).collect();
    let total = size.pow(n as u32);
    let h = 2.0 * std::f64::consts::PI / size as f64;
    let amp = (1.0 - margin) / 2.0;
    let samples: Vec<Mat<C>> = (0..total)
        .map(|flat| {
            let x = (flat % size) as f64 * h;
            let a00 = &identity(m)
                + &(&scale(cr(amp * x.sin()), &g00[0]) + &scale(cr(amp * x.cos()), &g00[1]));
            let att = &identity(n * m)
                + &(&scale(cr(amp * x.sin()), &gtt[0]) + &scale(cr(amp * x.cos()), &gtt[1]));
            Mat::from_fn(dim, dim, |i, j| match (i < m, j < m) {
                (true, true) => a00[(i, j)],
                (false, false) => att[(i - m, j - m)],
                _ => C::new(0.0, 0.0),
            })
        })
        .collect();
    CoefficientField::grid(n, m, size, samples).expect("valid grid field")
}

/// Zero-mean scalar-valued (`C^m`) grid data built from low trigonometric
/// modes; used as generic boundary data on the 1-torus.
pub fn random_trig_data<R: Rng>(rng: &mut R, m: usize, size: usize) -> Vec<C> {
    let h = 2.0 * std::f64::consts::PI / size as f64;
    let coeffs: Vec<(f64, f64, f64, f64)> = (0..3 * m)
        .map(|_| {
            (
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            )
        })
        .collect();
    let mut out = vec![C::new(0.0, 0.0); size * m];
    for j in 0..size {
        let x = j as f64 * h;
        for alpha in 0..m {
            let mut v = C::new(0.0, 0.0);
            for q in 0..3 {
                let (a, b, c, d) = coeffs[alpha * 3 + q];
                let k = (q + 1) as f64;
                v += C::new(a, b) * cr((k * x).cos()) + C::new(c, d) * cr((k * x).sin());
            }
            out[j * m + alpha] = v;
        }
    }
    out
}
