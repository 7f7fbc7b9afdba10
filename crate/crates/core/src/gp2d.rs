//! Gross-Pitaevskii energy on the periodic pseudospectral grid and the
//! normalized gradient-flow minimizer for the mass-constrained ground state.
//!
//! Energy: F_a(u) = ∫|∇u|² + ∫V|u|² − (a/2)∫|u|⁴ − Ω∫ x^⊥·(iu, ∇u),
//! with x^⊥ = (−x₂, x₁) and (iu, ∇u) = Im(ū ∇u). The flow treats the
//! diffusion term spectrally implicit and everything local explicitly, then
//! renormalizes the mass each step.

use crate::field::ComplexField;
use crate::grid::{Grid2D, Spectral};
use crate::linalg::solve_dense;
use crate::trap::{self, TrapSpec};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Any normalized state with a ≤ a* and V_Ω ≥ 0 has nonnegative energy, so a
/// sustained drop below this floor certifies the nonexistence regime.
const COLLAPSE_ENERGY_FLOOR: f64 = -1.0;
/// Cadence (in accepted steps) of Euler-Lagrange residual checks.
const RESIDUAL_CHECK_EVERY: usize = 64;

#[derive(Debug, Error)]
pub enum Gp2dError {
    #[error("unnormalized-input: mass = {0}")]
    Unnormalized(f64),
    #[error("collapse-detected: energy {energy:.6e} after {iterations} iterations")]
    CollapseDetected { energy: f64, iterations: usize },
    #[error("no-convergence: {0}")]
    NoConvergence(String),
    #[error("inconsistent-multiplier: e_F route {from_energy:.8e} vs quadratic form {from_operator:.8e}")]
    InconsistentMultiplier { from_energy: f64, from_operator: f64 },
    #[error("grid mismatch between initialization and requested grid")]
    GridMismatch,
    #[error(transparent)]
    Trap(#[from] trap::TrapError),
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOpts {
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MinimizeOpts {
    fn default() -> Self {
        MinimizeOpts {
            dt: 5e-3,
            tol: 1e-10,
            max_iter: 200_000,
        }
    }
}

/// Initialization of the flow.
pub enum Init {
    /// Centered unit-width gaussian.
    Gaussian,
    /// Caller-provided field (renormalized to unit mass).
    Field(ComplexField),
    /// Seeded random gaussian bump with a random linear phase.
    Seeded(u64),
}

/// A converged constrained minimizer.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub field: ComplexField,
    pub a: f64,
    pub omega: f64,
    pub energy: f64,
    pub mu: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Sub-grid location of max |u| from a local quadratic fit.
    pub peak: [f64; 2],
    /// ε_a = (∫|∇u|²)^{-1/2} by spectral Parseval sum.
    pub epsilon: f64,
    /// Energy of the initialization (the flow is monotone below it).
    pub initial_energy: f64,
    /// (iteration, residual) samples logged during the flow.
    pub residual_history: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
    pub rotation: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential + self.interaction + self.rotation
    }
}

pub(crate) fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Workspace binding one grid to trap samples and FFT plans.
struct Flow {
    sp: Spectral,
    grid: Grid2D,
    v: Vec<f64>,
    a: f64,
    omega: f64,
    d1: Vec<Complex64>,
    d2: Vec<Complex64>,
}

impl Flow {
    fn new(grid: Grid2D, a: f64, omega: f64, trap_spec: &TrapSpec) -> Result<Self, Gp2dError> {
        let os = trap::omega_star(trap_spec);
        if omega < 0.0 || omega >= os {
            return Err(trap::TrapError::SupercriticalVelocity {
                omega,
                omega_star: os,
            }
            .into());
        }
        let n = grid.n;
        let mut v = Vec::with_capacity(n * n);
        for iy in 0..n {
            let y = grid.coord(iy);
            for ix in 0..n {
                v.push(trap::eval_v(trap_spec, [grid.coord(ix), y]));
            }
        }
        Ok(Flow {
            sp: Spectral::new(grid),
            grid,
            v,
            a,
            omega,
            d1: vec![Complex64::default(); n * n],
            d2: vec![Complex64::default(); n * n],
        })
    }

    /// Fill d1, d2 with the spectral gradient from the spectrum of u.
    fn gradient_from_spectrum(&mut self, spectrum: &[Complex64]) {
        self.d1.copy_from_slice(spectrum);
        self.sp
            .scale_modes(&mut self.d1, |kx, _| Complex64::new(0.0, kx));
        self.sp.ifft2(&mut self.d1);
        self.d2.copy_from_slice(spectrum);
        self.sp
            .scale_modes(&mut self.d2, |_, ky| Complex64::new(0.0, ky));
        self.sp.ifft2(&mut self.d2);
    }

    fn breakdown(&self, u: &[Complex64], spectrum: &[Complex64]) -> EnergyBreakdown {
        let n = self.grid.n;
        let dx2 = self.grid.dx() * self.grid.dx();
        let kinetic = self
            .sp
            .mode_weighted_power(spectrum, |kx, ky| kx * kx + ky * ky)
            * dx2
            / (n * n) as f64;
        let mut potential = 0.0;
        let mut quartic = 0.0;
        let mut rotation = 0.0;
        for iy in 0..n {
            let y = self.grid.coord(iy);
            for ix in 0..n {
                let idx = iy * n + ix;
                let x = self.grid.coord(ix);
                let dens = u[idx].norm_sqr();
                potential += self.v[idx] * dens;
                quartic += dens * dens;
                rotation += -y * (u[idx].conj() * self.d1[idx]).im
                    + x * (u[idx].conj() * self.d2[idx]).im;
            }
        }
        EnergyBreakdown {
            kinetic,
            potential: potential * dx2,
            interaction: -0.5 * self.a * quartic * dx2,
            rotation: -self.omega * rotation * dx2,
        }
    }

    /// Euler-Lagrange operator applied to u, using cached gradient buffers.
    /// `lap` must hold −Δu.
    fn gp_pointwise(&self, u: &[Complex64], lap: &[Complex64], out: &mut [Complex64]) {
        let n = self.grid.n;
        for iy in 0..n {
            let y = self.grid.coord(iy);
            for ix in 0..n {
                let idx = iy * n + ix;
                let x = self.grid.coord(ix);
                let rot = Complex64::new(0.0, self.omega)
                    * (-y * self.d1[idx] + x * self.d2[idx]);
                out[idx] = lap[idx] + self.v[idx] * u[idx] + rot
                    - self.a * u[idx].norm_sqr() * u[idx];
            }
        }
    }

    fn el_residual_norm(&mut self, u: &[Complex64], spectrum: &[Complex64], mu: f64) -> f64 {
        let mut lap = spectrum.to_vec();
        self.sp
            .scale_modes(&mut lap, |kx, ky| Complex64::new(kx * kx + ky * ky, 0.0));
        self.sp.ifft2(&mut lap);
        let mut gp = vec![Complex64::default(); u.len()];
        self.gp_pointwise(u, &lap, &mut gp);
        let dx2 = self.grid.dx() * self.grid.dx();
        let mut acc = 0.0;
        for (g, uu) in gp.iter().zip(u) {
            acc += (g - mu * uu).norm_sqr();
        }
        (acc * dx2).sqrt()
    }
}

fn mass_of(values: &[Complex64], dx2: f64) -> f64 {
    values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx2
}

/// A unit-mass centered gaussian.
pub fn gaussian_field(grid: Grid2D) -> ComplexField {
    let mut f = ComplexField::from_fn(grid, |x, y| {
        Complex64::new((-(x * x + y * y) / 2.0).exp(), 0.0)
    });
    f.normalize();
    f
}

/// Seeded random initialization: a unit-mass gaussian bump at a uniformly
/// random offset within |x| ≤ L/4, times a random linear phase with periodic
/// wavenumbers.
pub fn seeded_field(grid: Grid2D, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    let radius = grid.l / 4.0 * rng.gen::<f64>().sqrt();
    let angle = rng.gen::<f64>() * std::f64::consts::TAU;
    let (cx, cy) = (radius * angle.cos(), radius * angle.sin());
    let width = rng.gen_range(0.7..1.6);
    let q_scale = std::f64::consts::PI / grid.l;
    let qx = rng.gen_range(-3i32..=3) as f64 * q_scale;
    let qy = rng.gen_range(-3i32..=3) as f64 * q_scale;
    let mut f = ComplexField::from_fn(grid, |x, y| {
        let r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        Complex64::from_polar((-r2 / (2.0 * width * width)).exp(), qx * x + qy * y)
    });
    f.normalize();
    f
}

/// GP energy of a unit-mass field.
pub fn energy(
    u: &ComplexField,
    a: f64,
    omega: f64,
    trap_spec: &TrapSpec,
) -> Result<f64, Gp2dError> {
    let m = u.mass();
    if (m - 1.0).abs() > 1e-8 {
        return Err(Gp2dError::Unnormalized(m));
    }
    Ok(energy_breakdown(u, a, omega, trap_spec)?.total())
}

/// Energy split into kinetic, potential, interaction and rotation parts.
pub fn energy_breakdown(
    u: &ComplexField,
    a: f64,
    omega: f64,
    trap_spec: &TrapSpec,
) -> Result<EnergyBreakdown, Gp2dError> {
    let mut flow = Flow::new(u.grid, a, omega, trap_spec)?;
    let mut spectrum = u.values.clone();
    flow.sp.fft2(&mut spectrum);
    flow.gradient_from_spectrum(&spectrum);
    Ok(flow.breakdown(&u.values, &spectrum))
}

/// The Euler-Lagrange operator −Δu + Vu + iΩ(x^⊥·∇u) − a|u|²u.
pub fn gp_apply(
    u: &ComplexField,
    a: f64,
    omega: f64,
    trap_spec: &TrapSpec,
) -> Result<ComplexField, Gp2dError> {
    let mut flow = Flow::new(u.grid, a, omega, trap_spec)?;
    let mut spectrum = u.values.clone();
    flow.sp.fft2(&mut spectrum);
    flow.gradient_from_spectrum(&spectrum);
    let mut lap = spectrum.clone();
    flow.sp
        .scale_modes(&mut lap, |kx, ky| Complex64::new(kx * kx + ky * ky, 0.0));
    flow.sp.ifft2(&mut lap);
    let mut out = ComplexField::zeros(u.grid);
    flow.gp_pointwise(&u.values, &lap, &mut out.values);
    Ok(out)
}

/// Normalized gradient flow for e_F(a) = inf { F_a(u) : ‖u‖₂ = 1 }.
pub fn minimize(
    a: f64,
    omega: f64,
    trap_spec: &TrapSpec,
    grid: Grid2D,
    init: Init,
    opts: MinimizeOpts,
) -> Result<GroundState, Gp2dError> {
    let mut flow = Flow::new(grid, a, omega, trap_spec)?;
    let n = grid.n;
    let dx2 = grid.dx() * grid.dx();

    let mut u = match init {
        Init::Gaussian => gaussian_field(grid).values,
        Init::Seeded(seed) => seeded_field(grid, seed).values,
        Init::Field(f) => {
            if f.grid != grid {
                return Err(Gp2dError::GridMismatch);
            }
            let mut f = f;
            f.normalize();
            f.values
        }
    };

    let v_max = flow.v.iter().cloned().fold(0.0_f64, f64::max);
    let dt0 = opts.dt;
    // Explicit treatment of the local terms caps the stable step near 2/V_max.
    let dt_max = (4.0 * dt0).min(1.8 / v_max.max(1e-9));
    let mut dt = dt0.min(dt_max);
    let collapse_floor = (-1.0 / opts.tol).max(COLLAPSE_ENERGY_FLOOR);

    let mut spectrum = u.clone();
    flow.sp.fft2(&mut spectrum);

    let mut e_prev = f64::INFINITY;
    let mut initial_energy = 0.0;
    let mut saved_u = u.clone();
    let mut saved_spec = spectrum.clone();
    let mut residual_history = Vec::new();
    let mut streak = 0usize;
    let mut iterations = 0usize;
    let mut rhs = vec![Complex64::default(); n * n];
    let mut last_residual = f64::INFINITY;

    let mut step_count = 0usize;
    let result = loop {
        if step_count > opts.max_iter {
            return Err(Gp2dError::NoConvergence(format!(
                "iteration cap {} reached (residual {last_residual:.3e})",
                opts.max_iter
            )));
        }
        step_count += 1;

        flow.gradient_from_spectrum(&spectrum);
        let parts = flow.breakdown(&u, &spectrum);
        let e = parts.total();

        if e > e_prev + 1e-12 * (1.0 + e_prev.abs()) {
            // Energy rose: reject the last step and halve dt.
            u.copy_from_slice(&saved_u);
            spectrum.copy_from_slice(&saved_spec);
            dt *= 0.5;
            streak = 0;
            if dt < 1e-10 {
                return Err(Gp2dError::NoConvergence(
                    "step size collapsed during backtracking".into(),
                ));
            }
            continue;
        }
        if iterations == 0 {
            initial_energy = e;
        }
        if e < collapse_floor {
            return Err(Gp2dError::CollapseDetected {
                energy: e,
                iterations,
            });
        }

        let delta = e_prev - e;
        let mu = e + 0.5 * parts.interaction; // e − (a/2)∫|u|⁴
        let residual_due = iterations % RESIDUAL_CHECK_EVERY == 0 || delta < opts.tol;
        if residual_due {
            last_residual = flow.el_residual_norm(&u, &spectrum, mu);
            residual_history.push((iterations, last_residual));
        }
        if iterations > 0 && delta < opts.tol && last_residual < opts.tol.sqrt() {
            let field = ComplexField {
                grid,
                values: u.clone(),
            };
            let kinetic = parts.kinetic;
            break GroundState {
                peak: subgrid_peak(&field),
                epsilon: kinetic.powf(-0.5),
                field,
                a,
                omega,
                energy: e,
                mu,
                residual: last_residual,
                iterations,
                initial_energy,
                residual_history,
            };
        }

        // Semi-implicit step: local terms explicit, diffusion spectral.
        saved_u.copy_from_slice(&u);
        saved_spec.copy_from_slice(&spectrum);
        for iy in 0..n {
            let y = grid.coord(iy);
            for ix in 0..n {
                let idx = iy * n + ix;
                let x = grid.coord(ix);
                let rot = Complex64::new(0.0, omega)
                    * (-y * flow.d1[idx] + x * flow.d2[idx]);
                let g = flow.v[idx] * u[idx] + rot - a * u[idx].norm_sqr() * u[idx];
                rhs[idx] = u[idx] - dt * g;
            }
        }
        flow.sp.fft2(&mut rhs);
        flow.sp.scale_modes(&mut rhs, |kx, ky| {
            Complex64::new(1.0 / (1.0 + dt * (kx * kx + ky * ky)), 0.0)
        });
        spectrum.copy_from_slice(&rhs);
        flow.sp.ifft2(&mut rhs);
        let scale = 1.0 / mass_of(&rhs, dx2).sqrt();
        for (dst, src) in u.iter_mut().zip(&rhs) {
            *dst = scale * src;
        }
        for s in spectrum.iter_mut() {
            *s *= scale;
        }

        e_prev = e;
        iterations += 1;
        streak += 1;
        if streak >= 64 {
            dt = (dt * 1.25).min(dt_max);
            streak = 0;
        }
    };
    Ok(result)
}

/// Lagrange multiplier μ = e_F(a) − (a/2)∫|u|⁴, cross-checked against the
/// quadratic form ⟨gp_apply(u), u⟩.
pub fn chemical_potential(
    state: &GroundState,
    trap_spec: &TrapSpec,
) -> Result<f64, Gp2dError> {
    let parts = energy_breakdown(&state.field, state.a, state.omega, trap_spec)?;
    let from_energy = parts.total() + 0.5 * parts.interaction;
    let gp = gp_apply(&state.field, state.a, state.omega, trap_spec)?;
    let from_operator = gp.inner(&state.field).re;
    if (from_energy - from_operator).abs() > 1e-4 * (1.0 + from_energy.abs()) {
        return Err(Gp2dError::InconsistentMultiplier {
            from_energy,
            from_operator,
        });
    }
    Ok(from_energy)
}

/// L² norm of gp_apply(u) − μu with μ from the energy formula.
pub fn el_residual(state: &GroundState, trap_spec: &TrapSpec) -> Result<f64, Gp2dError> {
    let parts = energy_breakdown(&state.field, state.a, state.omega, trap_spec)?;
    let mu = parts.total() + 0.5 * parts.interaction;
    let gp = gp_apply(&state.field, state.a, state.omega, trap_spec)?;
    let dx2 = state.field.grid.dx() * state.field.grid.dx();
    let acc: f64 = gp
        .values
        .iter()
        .zip(&state.field.values)
        .map(|(g, u)| (g - mu * u).norm_sqr())
        .sum();
    Ok((acc * dx2).sqrt())
}

/// Gagliardo-Nirenberg ratio ∫|u|⁴ / [(2/a*)∫|∇|u||²] for a unit-mass field.
pub fn gn_ratio(u: &ComplexField, a_star: f64) -> f64 {
    let dx2 = u.grid.dx() * u.grid.dx();
    let quartic: f64 = u.values.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() * dx2;
    let grad_mod = modulus_gradient_energy(u);
    quartic / (2.0 / a_star * grad_mod)
}

/// ∫|∇|u||² with the modulus taken pointwise and the gradient spectral.
pub fn modulus_gradient_energy(u: &ComplexField) -> f64 {
    let grid = u.grid;
    let mut sp = Spectral::new(grid);
    let mut modulus: Vec<Complex64> = u
        .values
        .iter()
        .map(|v| Complex64::new(v.norm(), 0.0))
        .collect();
    sp.fft2(&mut modulus);
    let n2 = (grid.n * grid.n) as f64;
    sp.mode_weighted_power(&modulus, |kx, ky| kx * kx + ky * ky) * grid.dx() * grid.dx() / n2
}

/// ∫|(∇ − iA)u|² with the gauge field A = (Ω/2)x^⊥.
pub fn covariant_kinetic(u: &ComplexField, omega: f64) -> f64 {
    let grid = u.grid;
    let mut sp = Spectral::new(grid);
    let mut spectrum = u.values.clone();
    sp.fft2(&mut spectrum);
    let mut d1 = spectrum.clone();
    sp.scale_modes(&mut d1, |kx, _| Complex64::new(0.0, kx));
    sp.ifft2(&mut d1);
    let mut d2 = spectrum;
    sp.scale_modes(&mut d2, |_, ky| Complex64::new(0.0, ky));
    sp.ifft2(&mut d2);
    let n = grid.n;
    let mut acc = 0.0;
    for iy in 0..n {
        let y = grid.coord(iy);
        for ix in 0..n {
            let idx = iy * n + ix;
            let x = grid.coord(ix);
            let a1 = -0.5 * omega * y;
            let a2 = 0.5 * omega * x;
            let c1 = d1[idx] - Complex64::new(0.0, a1) * u.values[idx];
            let c2 = d2[idx] - Complex64::new(0.0, a2) * u.values[idx];
            acc += c1.norm_sqr() + c2.norm_sqr();
        }
    }
    acc * grid.dx() * grid.dx()
}

/// Sub-grid peak location of |u| from a quadratic fit on the 3×3 stencil
/// around the maximal node (periodic indexing).
pub fn subgrid_peak(u: &ComplexField) -> [f64; 2] {
    let n = u.grid.n;
    let mut best = 0usize;
    let mut best_val = -1.0;
    for (idx, v) in u.values.iter().enumerate() {
        let d = v.norm_sqr();
        if d > best_val {
            best_val = d;
            best = idx;
        }
    }
    let (bx, by) = (best % n, best / n);
    // Least squares c0 + c1 X + c2 Y + c3 X² + c4 XY + c5 Y² on the stencil.
    let mut ata = [0.0; 36];
    let mut atb = [0.0; 6];
    for dj in -1i64..=1 {
        for di in -1i64..=1 {
            let ix = (bx as i64 + di).rem_euclid(n as i64) as usize;
            let iy = (by as i64 + dj).rem_euclid(n as i64) as usize;
            let s = u.values[iy * n + ix].norm_sqr();
            let row = [1.0, di as f64, dj as f64, (di * di) as f64, (di * dj) as f64, (dj * dj) as f64];
            for p in 0..6 {
                for q in 0..6 {
                    ata[p * 6 + q] += row[p] * row[q];
                }
                atb[p] += row[p] * s;
            }
        }
    }
    let mut delta = [0.0_f64, 0.0];
    if solve_dense(6, &mut ata, &mut atb).is_ok() {
        let (g1, g2, hxx, hxy, hyy) = (atb[1], atb[2], 2.0 * atb[3], atb[4], 2.0 * atb[5]);
        let det = hxx * hyy - hxy * hxy;
        if det.abs() > 1e-14 * (hxx.abs() + hyy.abs() + 1e-300).powi(2) {
            delta = [
                -(hyy * g1 - hxy * g2) / det,
                -(-hxy * g1 + hxx * g2) / det,
            ];
            delta[0] = delta[0].clamp(-1.0, 1.0);
            delta[1] = delta[1].clamp(-1.0, 1.0);
        }
    }
    let dx = u.grid.dx();
    [
        u.grid.coord(bx) + delta[0] * dx,
        u.grid.coord(by) + delta[1] * dx,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::townes::{a_star, eval_w_2d, solve_w, RadialProfile};
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    fn profile() -> &'static RadialProfile {
        static CELL: OnceLock<RadialProfile> = OnceLock::new();
        CELL.get_or_init(|| solve_w(20.0, 1e-10).expect("solver"))
    }

    fn harmonic() -> TrapSpec {
        TrapSpec::new(2.0, 0.0, 0.0).unwrap()
    }

    fn oscillator_ground(grid: Grid2D) -> ComplexField {
        let mut f = ComplexField::from_fn(grid, |x, y| {
            Complex64::new((1.0 / PI).sqrt() * (-(x * x + y * y) / 2.0).exp(), 0.0)
        });
        f.normalize();
        f
    }

    fn townes_on_grid(grid: Grid2D) -> ComplexField {
        let p = profile();
        let scale = 1.0 / a_star(p).sqrt();
        let mut f = ComplexField::from_fn(grid, |x, y| {
            Complex64::new(scale * eval_w_2d(p, &[[x, y]])[0], 0.0)
        });
        f.normalize();
        f
    }

    #[test]
    fn harmonic_oscillator_energy_is_two() {
        let grid = Grid2D::new(128, 8.0).unwrap();
        let u = oscillator_ground(grid);
        let e = energy(&u, 0.0, 0.0, &harmonic()).unwrap();
        assert!((e - 2.0).abs() < 1e-6, "energy {e}");
    }

    #[test]
    fn real_field_has_no_rotation_energy() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let u = oscillator_ground(grid);
        let parts = energy_breakdown(&u, 0.3, 1.0, &harmonic()).unwrap();
        assert_eq!(parts.rotation, 0.0);
    }

    #[test]
    fn townes_profile_balances_kinetic_and_interaction() {
        // At a = a* the GN equality makes kinetic + interaction cancel.
        let grid = Grid2D::new(128, 16.0).unwrap();
        let u = townes_on_grid(grid);
        let a = a_star(profile());
        let parts = energy_breakdown(&u, a, 0.0, &harmonic()).unwrap();
        let rel = (parts.kinetic + parts.interaction).abs() / parts.kinetic;
        assert!(rel < 1e-3, "imbalance {rel}");
    }

    #[test]
    fn unnormalized_input_rejected() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let mut u = oscillator_ground(grid);
        for v in u.values.iter_mut() {
            *v *= 2.0;
        }
        assert!(matches!(
            energy(&u, 0.0, 0.0, &harmonic()),
            Err(Gp2dError::Unnormalized(_))
        ));
    }

    #[test]
    fn gp_apply_oscillator_eigenfunction() {
        let grid = Grid2D::new(128, 8.0).unwrap();
        let u = oscillator_ground(grid);
        let out = gp_apply(&u, 0.0, 0.0, &harmonic()).unwrap();
        let mut worst = 0.0_f64;
        for (o, v) in out.values.iter().zip(&u.values) {
            worst = worst.max((o - 2.0 * v).norm());
        }
        assert!(worst < 1e-8, "max deviation {worst}");
    }

    #[test]
    fn gp_apply_nonlinearity_is_exactly_cubic() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let u = oscillator_ground(grid);
        let v = ComplexField {
            grid,
            values: u
                .values
                .iter()
                .enumerate()
                .map(|(i, z)| z * Complex64::new(0.3, 0.1 * ((i % 7) as f64)))
                .collect(),
        };
        let a = 1.7;
        let sum = ComplexField {
            grid,
            values: u.values.iter().zip(&v.values).map(|(a, b)| a + b).collect(),
        };
        let a_sum = gp_apply(&sum, a, 0.8, &harmonic()).unwrap();
        let a_u = gp_apply(&u, a, 0.8, &harmonic()).unwrap();
        let a_v = gp_apply(&v, a, 0.8, &harmonic()).unwrap();
        // The linear part cancels; what remains is the cubic cross-term.
        for i in 0..u.values.len() {
            let linear_defect = a_sum.values[i] - a_u.values[i] - a_v.values[i];
            let s = sum.values[i];
            let cubic = -a
                * (s.norm_sqr() * s
                    - u.values[i].norm_sqr() * u.values[i]
                    - v.values[i].norm_sqr() * v.values[i]);
            assert!((linear_defect - cubic).norm() < 1e-10);
        }
    }

    #[test]
    fn quadratic_form_is_real() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        // Smooth complex field with nontrivial phase.
        let mut u = ComplexField::from_fn(grid, |x, y| {
            Complex64::from_polar(
                (-(x * x + y * y) / 3.0).exp(),
                0.5 * x - 0.3 * y + 0.2 * x * y,
            )
        });
        u.normalize();
        let gp = gp_apply(&u, 2.0, 1.1, &harmonic()).unwrap();
        let q = gp.inner(&u);
        assert!(q.im.abs() < 1e-10 * (1.0 + q.re.abs()), "Im = {}", q.im);
    }

    #[test]
    fn gauge_invariance_of_energy() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let mut u = oscillator_ground(grid);
        let e0 = energy(&u, 1.0, 0.9, &harmonic()).unwrap();
        u.rotate_phase(1.234);
        let e1 = energy(&u, 1.0, 0.9, &harmonic()).unwrap();
        assert!((e0 - e1).abs() < 1e-12 * (1.0 + e0.abs()));
    }

    #[test]
    fn diamagnetic_inequality_on_random_smooth_fields() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            // Band-limited random field.
            let (n1, n2, n3) = (
                rng.gen_range(-3i32..=3),
                rng.gen_range(-3i32..=3),
                rng.gen_range(1i32..=3),
            );
            let q = std::f64::consts::PI / grid.l;
            let mut u = ComplexField::from_fn(grid, |x, y| {
                let envelope = (-(x * x + y * y) / 4.0).exp();
                let phase = q * (n1 as f64 * x + n2 as f64 * y);
                let wiggle = 1.0 + 0.4 * (q * n3 as f64 * x).cos();
                Complex64::from_polar(envelope * wiggle, phase)
            });
            u.normalize();
            let lhs = covariant_kinetic(&u, 1.3);
            let rhs = modulus_gradient_energy(&u);
            assert!(lhs >= rhs - 1e-10, "lhs {lhs} < rhs {rhs}");
        }
    }

    #[test]
    fn linear_limit_ground_state() {
        let grid = Grid2D::new(128, 8.0).unwrap();
        let state = minimize(
            0.0,
            0.0,
            &harmonic(),
            grid,
            Init::Gaussian,
            MinimizeOpts::default(),
        )
        .unwrap();
        assert!((state.energy - 2.0).abs() < 1e-5, "energy {}", state.energy);
        assert!((state.mu - 2.0).abs() < 1e-5, "mu {}", state.mu);
        assert!((state.field.mass() - 1.0).abs() < 1e-10);
        assert!(state.energy <= state.initial_energy);
        assert!(state.peak[0].abs() < 0.1 && state.peak[1].abs() < 0.1);
    }

    #[test]
    fn multistart_energies_agree() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let trap_spec = TrapSpec::new(2.0, 0.5, 0.0).unwrap();
        let a = 0.5 * a_star(profile());
        let opts = MinimizeOpts {
            tol: 1e-11,
            ..Default::default()
        };
        let energies: Vec<f64> = (0..3)
            .map(|i| {
                minimize(a, 1.0, &trap_spec, grid, Init::Seeded(100 + i), opts)
                    .unwrap()
                    .energy
            })
            .collect();
        for e in &energies {
            assert!(
                (e - energies[0]).abs() < 1e-7 * (1.0 + energies[0].abs()),
                "energies {energies:?}"
            );
        }
    }

    #[test]
    fn collapse_detected_above_critical_coupling() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let trap_spec = TrapSpec::new(2.0, 0.5, 0.0).unwrap();
        let a = 1.02 * a_star(profile());
        let err = minimize(
            a,
            1.0,
            &trap_spec,
            grid,
            Init::Gaussian,
            MinimizeOpts::default(),
        )
        .unwrap_err();
        assert!(
            err.to_string().contains("collapse-detected"),
            "got {err}"
        );
    }

    #[test]
    fn chemical_potential_routes_agree() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let trap_spec = harmonic();
        let a = 0.5 * a_star(profile());
        let state = minimize(
            a,
            0.0,
            &trap_spec,
            grid,
            Init::Gaussian,
            MinimizeOpts::default(),
        )
        .unwrap();
        let mu = chemical_potential(&state, &trap_spec).unwrap();
        let gp = gp_apply(&state.field, a, 0.0, &trap_spec).unwrap();
        let quad = gp.inner(&state.field).re;
        assert!((mu - quad).abs() < 1e-6 * (1.0 + mu.abs()));
        // At a = 0 the multiplier equals the energy.
        let linear = minimize(
            0.0,
            0.0,
            &trap_spec,
            grid,
            Init::Gaussian,
            MinimizeOpts::default(),
        )
        .unwrap();
        let mu0 = chemical_potential(&linear, &trap_spec).unwrap();
        assert!((mu0 - linear.energy).abs() < 1e-9);
    }

    #[test]
    fn residual_small_after_convergence_large_on_random_field() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let trap_spec = harmonic();
        let opts = MinimizeOpts::default();
        let state = minimize(0.5, 0.5, &trap_spec, grid, Init::Gaussian, opts).unwrap();
        let res = el_residual(&state, &trap_spec).unwrap();
        assert!(res < opts.tol.sqrt(), "residual {res}");

        let random = GroundState {
            field: seeded_field(grid, 999),
            ..state.clone()
        };
        let res_rand = el_residual(&random, &trap_spec).unwrap();
        assert!(res_rand > 0.1, "random residual {res_rand}");

        // Logged residuals trend downward along the flow.
        let hist = &state.residual_history;
        assert!(hist.len() >= 2);
        assert!(hist.last().unwrap().1 <= hist.first().unwrap().1);
    }

    #[test]
    fn gn_ratio_townes_is_sharp_gaussian_below() {
        let grid = Grid2D::new(128, 16.0).unwrap();
        let a = a_star(profile());
        let u = townes_on_grid(grid);
        let ratio = gn_ratio(&u, a);
        assert!((ratio - 1.0).abs() < 1e-4, "ratio {ratio}");

        let g = Grid2D::new(64, 8.0).unwrap();
        let gauss = oscillator_ground(g);
        let r = gn_ratio(&gauss, a);
        assert!(r < 1.0, "gaussian ratio {r}");

        let mut rotated = gauss.clone();
        rotated.rotate_phase(0.9);
        assert!((gn_ratio(&rotated, a) - r).abs() < 1e-14);
    }

    #[test]
    fn grid_refinement_consistency_of_ground_energy() {
        let trap_spec = TrapSpec::new(2.0, 0.5, 0.0).unwrap();
        let a = 0.5 * a_star(profile());
        let coarse = minimize(
            a,
            1.0,
            &trap_spec,
            Grid2D::new(64, 8.0).unwrap(),
            Init::Gaussian,
            MinimizeOpts::default(),
        )
        .unwrap();
        let upsampled = crate::field::spectral_upsample(&coarse.field, 128);
        let fine = minimize(
            a,
            1.0,
            &trap_spec,
            Grid2D::new(128, 8.0).unwrap(),
            Init::Field(upsampled),
            MinimizeOpts::default(),
        )
        .unwrap();
        assert!(
            (coarse.energy - fine.energy).abs() < 1e-5,
            "64: {}, 128: {}",
            coarse.energy,
            fine.energy
        );
    }

    #[test]
    fn seeded_fields_are_deterministic_and_normalized() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let f1 = seeded_field(grid, 42);
        let f2 = seeded_field(grid, 42);
        assert_eq!(f1.values, f2.values);
        assert!((f1.mass() - 1.0).abs() < 1e-12);
        let f3 = seeded_field(grid, 43);
        assert!(f1.values != f3.values);
    }
}
