//! Complex wave function samples on a periodic square grid.

use crate::grid::{Grid2D, Spectral};
use num_complex::Complex64;

/// Complex field on an N×N grid, row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid2D,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid2D) -> Self {
        ComplexField {
            grid,
            values: vec![Complex64::default(); grid.n * grid.n],
        }
    }

    pub fn from_fn<F>(grid: Grid2D, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64,
    {
        let n = grid.n;
        let mut values = Vec::with_capacity(n * n);
        for iy in 0..n {
            let y = grid.coord(iy);
            for ix in 0..n {
                values.push(f(grid.coord(ix), y));
            }
        }
        ComplexField { grid, values }
    }

    /// Σ|u|² dx².
    pub fn mass(&self) -> f64 {
        let dx2 = self.grid.dx() * self.grid.dx();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx2
    }

    /// Rescale to unit mass; returns the scale factor applied.
    pub fn normalize(&mut self) -> f64 {
        let scale = 1.0 / self.mass().sqrt();
        for v in self.values.iter_mut() {
            *v *= scale;
        }
        scale
    }

    /// L² inner product ⟨u, v⟩ = Σ u v̄ dx².
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        debug_assert_eq!(self.grid, other.grid);
        let dx2 = self.grid.dx() * self.grid.dx();
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            * dx2
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Multiply by a constant phase e^{iθ}.
    pub fn rotate_phase(&mut self, theta: f64) {
        let ph = Complex64::new(0.0, theta).exp();
        for v in self.values.iter_mut() {
            *v *= ph;
        }
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn imag_part(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.im).collect()
    }
}

/// Spectral interpolation onto a finer grid of the same half-width by
/// zero-padding the spectrum.
pub fn spectral_upsample(field: &ComplexField, n_new: usize) -> ComplexField {
    let n = field.grid.n;
    assert!(n_new >= n && n_new.is_power_of_two());
    if n_new == n {
        return field.clone();
    }
    let mut sp = Spectral::new(field.grid);
    let mut coeffs = field.values.clone();
    sp.fft2(&mut coeffs);

    let grid_new = Grid2D { n: n_new, l: field.grid.l };
    let mut sp_new = Spectral::new(grid_new);
    let mut padded = vec![Complex64::default(); n_new * n_new];
    let half = n / 2;
    // Copy the four corner quadrants of the small spectrum; the Nyquist
    // content of resolved fields is negligible and lands in the low quadrants.
    for iy in 0..n {
        let src_base = iy * n;
        let ty = if iy < half { iy } else { n_new - (n - iy) };
        for ix in 0..n {
            let tx = if ix < half { ix } else { n_new - (n - ix) };
            padded[ty * n_new + tx] = coeffs[src_base + ix];
        }
    }
    let scale = (n_new * n_new) as f64 / (n * n) as f64;
    for v in padded.iter_mut() {
        *v *= scale;
    }
    sp_new.ifft2(&mut padded);
    ComplexField {
        grid: grid_new,
        values: padded,
    }
}
