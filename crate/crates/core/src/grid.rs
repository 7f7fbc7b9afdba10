//! Periodic square grid and the pseudospectral workspace built on it.
//!
//! The domain is [-L, L)² sampled at N points per side (row-major, x fastest).
//! Wavenumbers follow FFT ordering with spacing π/L.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid size {0} is not a power of two >= 64")]
    BadSize(usize),
    #[error("half-width {0} below the minimum 8")]
    BadHalfWidth(f64),
}

/// Square periodic grid: N points per side over [-L, L)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub n: usize,
    pub l: f64,
}

impl Grid2D {
    pub fn new(n: usize, l: f64) -> Result<Self, GridError> {
        if n < 64 || !n.is_power_of_two() {
            return Err(GridError::BadSize(n));
        }
        if l < 8.0 {
            return Err(GridError::BadHalfWidth(l));
        }
        Ok(Grid2D { n, l })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.dx()
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    /// Per-axis wavenumbers in FFT order: 0, 1, ..., N/2-1, -N/2, ..., -1
    /// scaled by π/L.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n;
        let scale = std::f64::consts::PI / self.l;
        (0..n)
            .map(|m| {
                let m = if m <= n / 2 - 1 {
                    m as isize
                } else {
                    m as isize - n as isize
                };
                scale * m as f64
            })
            .collect()
    }
}

/// FFT plans and scratch buffers for one grid size.
pub struct Spectral {
    pub grid: Grid2D,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    pub k: Vec<f64>,
    transpose_buf: Vec<Complex64>,
}

impl Spectral {
    pub fn new(grid: Grid2D) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n);
        let inv = planner.plan_fft_inverse(grid.n);
        Spectral {
            grid,
            fwd,
            inv,
            k: grid.wavenumbers(),
            transpose_buf: vec![Complex64::default(); grid.n * grid.n],
        }
    }

    fn rows_fft(plan: &Arc<dyn Fft<f64>>, n: usize, data: &mut [Complex64]) {
        let scratch_len = plan.get_inplace_scratch_len();
        data.par_chunks_mut(n).for_each_init(
            || vec![Complex64::default(); scratch_len],
            |scratch, row| plan.process_with_scratch(row, scratch),
        );
    }

    fn transpose(n: usize, src: &[Complex64], dst: &mut [Complex64]) {
        const BLOCK: usize = 32;
        for bi in (0..n).step_by(BLOCK) {
            for bj in (0..n).step_by(BLOCK) {
                for i in bi..(bi + BLOCK).min(n) {
                    for j in bj..(bj + BLOCK).min(n) {
                        dst[j * n + i] = src[i * n + j];
                    }
                }
            }
        }
    }

    /// In-place forward 2-D FFT (unnormalized).
    pub fn fft2(&mut self, data: &mut [Complex64]) {
        let n = self.grid.n;
        Self::rows_fft(&self.fwd, n, data);
        Self::transpose(n, data, &mut self.transpose_buf);
        Self::rows_fft(&self.fwd, n, &mut self.transpose_buf);
        Self::transpose(n, &self.transpose_buf, data);
    }

    /// In-place inverse 2-D FFT, normalized by 1/N².
    pub fn ifft2(&mut self, data: &mut [Complex64]) {
        let n = self.grid.n;
        Self::rows_fft(&self.inv, n, data);
        Self::transpose(n, data, &mut self.transpose_buf);
        Self::rows_fft(&self.inv, n, &mut self.transpose_buf);
        Self::transpose(n, &self.transpose_buf, data);
        let norm = 1.0 / (n * n) as f64;
        data.par_iter_mut().for_each(|v| *v *= norm);
    }

    /// Multiply spectral coefficients in place by a function of (kx, ky).
    pub fn scale_modes<F>(&self, data: &mut [Complex64], f: F)
    where
        F: Fn(f64, f64) -> Complex64 + Sync,
    {
        let n = self.grid.n;
        let k = &self.k;
        data.par_chunks_mut(n).enumerate().for_each(|(iy, row)| {
            let ky = k[iy];
            for (ix, v) in row.iter_mut().enumerate() {
                *v *= f(k[ix], ky);
            }
        });
    }

    /// Sum of g(kx, ky)·|F|² over modes (for Parseval-type sums).
    pub fn mode_weighted_power<F>(&self, spectrum: &[Complex64], g: F) -> f64
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let n = self.grid.n;
        let k = &self.k;
        let rows: Vec<f64> = spectrum
            .par_chunks(n)
            .enumerate()
            .map(|(iy, row)| {
                let ky = k[iy];
                let mut acc = 0.0;
                for (ix, v) in row.iter().enumerate() {
                    acc += g(k[ix], ky) * v.norm_sqr();
                }
                acc
            })
            .collect();
        rows.iter().sum()
    }
}
