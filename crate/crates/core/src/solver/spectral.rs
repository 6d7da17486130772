//! Square-grid 2D FFTs built from row transforms and an in-place transpose.
//!
//! The forward transform leaves the spectrum in *transposed* order:
//! `spec[ikx * n + iky]`, while real-space data is `psi[iy * n + ix]`.
//! Isotropic multipliers (the kinetic propagator) are unaffected; anything
//! direction-dependent must index through [`Spectral2d::kx_ky`].

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub struct Spectral2d {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for Spectral2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral2d").field("n", &self.n).finish()
    }
}

impl Spectral2d {
    pub fn new(n: usize, extent: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let dk = 2.0 * PI / extent;
        let wavenumbers = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as isize } else { j as isize - n as isize };
                m as f64 * dk
            })
            .collect();
        Spectral2d {
            n,
            fwd,
            inv,
            wavenumbers,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// `(κx, κy)` for a flat index into a transposed spectrum.
    #[inline]
    pub fn kx_ky(&self, idx: usize) -> (f64, f64) {
        (self.wavenumbers[idx / self.n], self.wavenumbers[idx % self.n])
    }

    /// `|κ|²` laid out like a spectrum (symmetric, so layout-agnostic).
    pub fn k_squared(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for (i, row) in out.chunks_mut(n).enumerate() {
            let ki = self.wavenumbers[i];
            for (j, v) in row.iter_mut().enumerate() {
                let kj = self.wavenumbers[j];
                *v = ki * ki + kj * kj;
            }
        }
        out
    }

    /// Whether a 1D index is the Nyquist bin.
    #[inline]
    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// Unnormalized forward DFT; output in transposed order.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.rows(data, &self.fwd);
        transpose(data, self.n);
        self.rows(data, &self.fwd);
    }

    /// Inverse DFT from transposed order back to row-major, without the `1/N²`.
    pub fn inverse_unnormalized(&self, data: &mut [Complex64]) {
        self.rows(data, &self.inv);
        transpose(data, self.n);
        self.rows(data, &self.inv);
    }

    /// Inverse DFT including the `1/N²` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse_unnormalized(data);
        let s = 1.0 / (self.n * self.n) as f64;
        data.par_iter_mut().for_each(|v| *v *= s);
    }

    fn rows(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.n * self.n);
        let scratch_len = plan.get_inplace_scratch_len();
        data.par_chunks_mut(self.n).for_each_init(
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, row| plan.process_with_scratch(row, scratch),
        );
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                let jstart = if bi == bj { i + 1 } else { bj };
                for j in jstart..(bj + BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}
