//! Frequency lattices on the n-torus and unitary FFT helpers.
//!
//! Fields are sampled on the uniform grid `x_j = 2π j / N` per axis and
//! represented either by their samples or by truncated Fourier coefficients
//! on the integer lattice `{-N/2, …, N/2-1}^n`, stored in FFT order
//! (`0, 1, …, N/2-1, -N/2, …, -1` per axis) so no permutation is needed at
//! transform boundaries.  The transforms here are unitary, which makes
//! multiplication operators in the frequency basis exactly unitarily
//! equivalent to sample-wise multiplication.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{CoreError, Result};
use crate::linalg::C;

#[derive(Debug, Clone)]
pub struct FrequencyLattice {
    /// Boundary dimension.
    pub n: usize,
    /// Modes (and grid points) per axis; a power of two.
    pub size: usize,
    freqs: Vec<Vec<i64>>,
}

impl FrequencyLattice {
    pub fn new(n: usize, size: usize) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::InvalidInput("lattice dimension must be ≥ 1".into()));
        }
        if size < 2 || !size.is_power_of_two() {
            return Err(CoreError::InvalidInput(format!(
                "modes per axis must be a power of two ≥ 2, got {size}"
            )));
        }
        let total = size.pow(n as u32);
        let mut freqs = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut f = vec![0i64; n];
            for ax in (0..n).rev() {
                let k = rem % size;
                rem /= size;
                f[ax] = Self::fft_freq(k, size);
            }
            freqs.push(f);
        }
        Ok(Self { n, size, freqs })
    }

    #[inline]
    fn fft_freq(k: usize, size: usize) -> i64 {
        if k < size / 2 {
            k as i64
        } else {
            k as i64 - size as i64
        }
    }

    pub fn num_points(&self) -> usize {
        self.freqs.len()
    }

    pub fn freq(&self, k: usize) -> &[i64] {
        &self.freqs[k]
    }

    pub fn freq_f64(&self, k: usize) -> Vec<f64> {
        self.freqs[k].iter().map(|&v| v as f64).collect()
    }

    pub fn freq_norm(&self, k: usize) -> f64 {
        self.freqs[k]
            .iter()
            .map(|&v| (v * v) as f64)
            .sum::<f64>()
            .sqrt()
    }

    /// Smallest nonzero |ξ| on the lattice (the base frequency).
    pub fn xi_min(&self) -> f64 {
        1.0
    }

    /// Largest |ξ| on the lattice.
    pub fn xi_max(&self) -> f64 {
        (0..self.num_points())
            .map(|k| self.freq_norm(k))
            .fold(0.0, f64::max)
    }

    /// Index of the zero frequency (always 0 in FFT order).
    pub fn zero_index(&self) -> usize {
        0
    }

    /// Flat index of an arbitrary integer frequency vector, wrapped mod N per
    /// axis.  Used to look up convolution kernels at frequency differences.
    pub fn wrap_index(&self, diff: &[i64]) -> usize {
        let nsz = self.size as i64;
        let mut flat = 0usize;
        for ax in 0..self.n {
            let r = ((diff[ax] % nsz) + nsz) % nsz;
            flat = flat * self.size + r as usize;
        }
        flat
    }

    /// Physical coordinates of grid point `j` (row-major flat index).
    pub fn point(&self, j: usize) -> Vec<f64> {
        let mut rem = j;
        let mut x = vec![0.0; self.n];
        let h = 2.0 * std::f64::consts::PI / self.size as f64;
        for ax in (0..self.n).rev() {
            x[ax] = (rem % self.size) as f64 * h;
            rem /= self.size;
        }
        x
    }

    fn fft_axes(&self, data: &mut [Complex64], comps: usize, forward: bool) {
        let total = self.num_points();
        assert_eq!(data.len(), total * comps);
        let mut planner = FftPlanner::new();
        let fft = if forward {
            planner.plan_fft_forward(self.size)
        } else {
            planner.plan_fft_inverse(self.size)
        };
        let mut line = vec![Complex64::new(0.0, 0.0); self.size];
        // Transform along each axis; axis `ax` has stride size^(n-1-ax) in
        // the row-major point index.
        for ax in 0..self.n {
            let stride = self.size.pow((self.n - 1 - ax) as u32);
            let n_lines = total / self.size;
            for l in 0..n_lines {
                // decompose l into (outer, inner) around the axis
                let inner = l % stride;
                let outer = l / stride;
                let base = outer * stride * self.size + inner;
                for c in 0..comps {
                    for k in 0..self.size {
                        line[k] = data[(base + k * stride) * comps + c];
                    }
                    fft.process(&mut line);
                    for k in 0..self.size {
                        data[(base + k * stride) * comps + c] = line[k];
                    }
                }
            }
        }
    }

    /// Unitary forward transform of point-major sampled data with `comps`
    /// components per point; returns frequency-major coefficients in the same
    /// layout.
    pub fn forward_unitary(&self, samples: &[C], comps: usize) -> Vec<C> {
        let mut buf: Vec<Complex64> = samples
            .iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect();
        self.fft_axes(&mut buf, comps, true);
        let scale = 1.0 / (self.num_points() as f64).sqrt();
        buf.iter().map(|z| C::new(z.re * scale, z.im * scale)).collect()
    }

    /// Unitary inverse transform, the exact inverse of [`forward_unitary`].
    pub fn inverse_unitary(&self, coeffs: &[C], comps: usize) -> Vec<C> {
        let mut buf: Vec<Complex64> = coeffs
            .iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect();
        self.fft_axes(&mut buf, comps, false);
        let scale = 1.0 / (self.num_points() as f64).sqrt();
        buf.iter().map(|z| C::new(z.re * scale, z.im * scale)).collect()
    }

    /// Classical Fourier coefficients `f̂(ξ) = P⁻¹ Σ_j f(x_j) e^{-iξ·x_j}`.
    pub fn dft_coeffs(&self, samples: &[C], comps: usize) -> Vec<C> {
        let scale = 1.0 / (self.num_points() as f64).sqrt();
        self.forward_unitary(samples, comps)
            .into_iter()
            .map(|z| z * C::new(scale, 0.0))
            .collect()
    }

    /// `L²(dx)` norm of sampled data on the torus.
    pub fn grid_l2(&self, samples: &[C]) -> f64 {
        let cell = (2.0 * std::f64::consts::PI / self.size as f64).powi(self.n as i32);
        (samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell).sqrt()
    }
}
