//! Scalar-field (Townes) profile: the unique positive radial solution of
//! -Δw + w - w³ = 0 in the plane, solved by shooting on the initial
//! amplitude, plus the integral identities and critical coupling built on it.
//!
//! The radial equation is w'' + w'/r = w - w³ with w'(0) = 0. For an initial
//! amplitude above the critical one the solution crosses zero; below it the
//! solution turns back upward. Bisection on w(0) therefore pins the decaying
//! solution to machine precision, and beyond the radius where w drops under
//! 1e-4 the stored values follow the asymptotic law C·r^{-1/2}·e^{-r}, whose
//! coefficient is fitted at the handover node.

use crate::quadrature::{exp_integral_e1, trapezoid};
use std::f64::consts::PI;
use thiserror::Error;

/// Shooting bracket for the initial amplitude w(0).
const BRACKET: (f64, f64) = (1.0, 4.0);
/// Handover threshold: smallest node with w below this switches to the tail law.
const TAIL_CUTOFF: f64 = 1e-4;
/// Target node spacing of the default radial grid.
const TARGET_SPACING: f64 = 3.05e-4;

#[derive(Debug, Error)]
pub enum TownesError {
    #[error("bracket-failure: shooting bracket [{0}, {1}] does not enclose a decaying solution")]
    BracketFailure(f64, f64),
    #[error("no-convergence: {0}")]
    NoConvergence(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// The scalar-field profile on a dense uniform radial grid.
///
/// Values beyond `r_match` follow the tail law `tail_coeff·r^{-1/2}·e^{-r}`;
/// inside, they are the shooting integration output.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub r_nodes: Vec<f64>,
    pub w_values: Vec<f64>,
    pub dw_values: Vec<f64>,
    pub tail_coeff: f64,
    pub r_match: f64,
    match_idx: usize,
    dr: f64,
}

/// Identity report for ∫|∇w|² = ∫w² = ½∫w⁴.
#[derive(Debug, Clone, Copy)]
pub struct IdentityReport {
    pub grad_sq: f64,
    pub mass: f64,
    pub half_quartic: f64,
    pub dev_grad_mass: f64,
    pub dev_grad_quartic: f64,
    pub dev_mass_quartic: f64,
}

impl IdentityReport {
    pub fn max_deviation(&self) -> f64 {
        self.dev_grad_mass
            .max(self.dev_grad_quartic)
            .max(self.dev_mass_quartic)
    }
}

enum Shot {
    /// w crossed zero: amplitude too large.
    Overshoot,
    /// w turned back upward while positive: amplitude too small.
    Undershoot,
}

/// Radial acceleration w'' = w - w³ - w'/r, regular at the origin.
#[inline]
fn accel(r: f64, w: f64, z: f64) -> f64 {
    if r == 0.0 {
        0.5 * (w - w * w * w)
    } else {
        w - w * w * w - z / r
    }
}

/// One classic RK4 step of the (w, w') system.
#[inline]
fn rk4_step(r: f64, w: f64, z: f64, h: f64) -> (f64, f64) {
    let k1w = z;
    let k1z = accel(r, w, z);
    let k2w = z + 0.5 * h * k1z;
    let k2z = accel(r + 0.5 * h, w + 0.5 * h * k1w, z + 0.5 * h * k1z);
    let k3w = z + 0.5 * h * k2z;
    let k3z = accel(r + 0.5 * h, w + 0.5 * h * k2w, z + 0.5 * h * k2z);
    let k4w = z + h * k3z;
    let k4z = accel(r + h, w + h * k3w, z + h * k3z);
    (
        w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
        z + h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z),
    )
}

fn classify(amplitude: f64, h: f64, steps: usize) -> Shot {
    let mut w = amplitude;
    let mut z = 0.0;
    for i in 0..steps {
        let r = i as f64 * h;
        let (wn, zn) = rk4_step(r, w, z, h);
        w = wn;
        z = zn;
        if w <= 0.0 {
            return Shot::Overshoot;
        }
        if z >= 0.0 {
            return Shot::Undershoot;
        }
    }
    // Still positive and decaying at r_max: the growing mode has not surfaced,
    // which only happens within the shrinking ambiguity band just above the
    // critical amplitude. Treat as undershoot to keep the bracket valid.
    Shot::Undershoot
}

/// Solve the scalar field equation out to `r_max` at the default grid density.
pub fn solve_w(r_max: f64, tol: f64) -> Result<RadialProfile, TownesError> {
    let n = (r_max / TARGET_SPACING).round() as usize;
    solve_w_with_nodes(r_max, tol, n + 1)
}

/// Solve with an explicit node count (n_nodes - 1 uniform intervals).
pub fn solve_w_with_nodes(r_max: f64, tol: f64, n_nodes: usize) -> Result<RadialProfile, TownesError> {
    if r_max < 15.0 {
        return Err(TownesError::InvalidInput(format!(
            "r_max = {r_max} below the minimum 15"
        )));
    }
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(TownesError::InvalidInput(format!(
            "tol = {tol} outside (0, 1e-6]"
        )));
    }
    if n_nodes < 1024 {
        return Err(TownesError::InvalidInput("grid too coarse".into()));
    }
    let steps = n_nodes - 1;
    let h = r_max / steps as f64;

    let (mut lo, mut hi) = BRACKET;
    match classify(lo, h, steps) {
        Shot::Undershoot => {}
        Shot::Overshoot => return Err(TownesError::BracketFailure(lo, hi)),
    }
    match classify(hi, h, steps) {
        Shot::Overshoot => {}
        Shot::Undershoot => return Err(TownesError::BracketFailure(lo, hi)),
    }

    let mut converged = false;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= f64::EPSILON * mid {
            converged = true;
            break;
        }
        match classify(mid, h, steps) {
            Shot::Overshoot => hi = mid,
            Shot::Undershoot => lo = mid,
        }
    }
    if !converged {
        return Err(TownesError::NoConvergence(
            "bisection step count exceeded".into(),
        ));
    }
    let amplitude = 0.5 * (lo + hi);

    // Final integration with storage.
    let mut r_nodes = Vec::with_capacity(n_nodes);
    let mut w_values = Vec::with_capacity(n_nodes);
    let mut dw_values = Vec::with_capacity(n_nodes);
    let mut w = amplitude;
    let mut z = 0.0;
    r_nodes.push(0.0);
    w_values.push(w);
    dw_values.push(z);
    let mut match_idx = 0usize;
    for i in 0..steps {
        let r = i as f64 * h;
        let (wn, zn) = rk4_step(r, w, z, h);
        w = wn;
        z = zn;
        r_nodes.push((i + 1) as f64 * h);
        w_values.push(w);
        dw_values.push(z);
        if match_idx == 0 && w < TAIL_CUTOFF {
            match_idx = i + 1;
        }
    }
    if match_idx == 0 {
        return Err(TownesError::NoConvergence(
            "profile never reached the tail cutoff; r_max too small".into(),
        ));
    }

    let r_match = r_nodes[match_idx];
    let tail_coeff = w_values[match_idx] * r_match.sqrt() * r_match.exp();
    // Replace the noise-dominated samples beyond the handover by the tail law.
    for i in (match_idx + 1)..n_nodes {
        let r = r_nodes[i];
        w_values[i] = tail_coeff * (-r).exp() / r.sqrt();
        dw_values[i] = -tail_coeff * (-r).exp() / r.sqrt() * (1.0 + 0.5 / r);
    }

    let profile = RadialProfile {
        r_nodes,
        w_values,
        dw_values,
        tail_coeff,
        r_match,
        match_idx,
        dr: h,
    };
    let res = profile.max_ode_residual();
    if res > tol {
        return Err(TownesError::NoConvergence(format!(
            "ODE residual {res:.3e} above tol {tol:.3e}"
        )));
    }
    Ok(profile)
}

impl RadialProfile {
    pub fn w0(&self) -> f64 {
        self.w_values[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.r_nodes.last().unwrap()
    }

    pub fn spacing(&self) -> f64 {
        self.dr
    }

    /// Max |−w'' − w'/r + w − w³| over interior nodes up to the tail handover,
    /// with w'' from a fourth-order central difference of the stored w'.
    pub fn max_ode_residual(&self) -> f64 {
        let h = self.dr;
        let mut worst = 0.0_f64;
        let hi = self.match_idx.saturating_sub(2);
        for i in 2..=hi {
            let wpp = (-self.dw_values[i + 2] + 8.0 * self.dw_values[i + 1]
                - 8.0 * self.dw_values[i - 1]
                + self.dw_values[i - 2])
                / (12.0 * h);
            let r = self.r_nodes[i];
            let w = self.w_values[i];
            let res = -wpp - self.dw_values[i] / r + w - w * w * w;
            worst = worst.max(res.abs());
        }
        worst
    }

    /// Evaluate w at any radius: monotone-safe cubic Hermite inside the
    /// handover radius, tail law beyond.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r > self.r_match {
            return self.tail_coeff * (-r).exp() / r.sqrt();
        }
        let (i, t) = self.locate(r);
        let (w0, w1) = (self.w_values[i], self.w_values[i + 1]);
        let secant = (w1 - w0) / self.dr;
        let d0 = clamp_slope(self.dw_values[i], secant);
        let d1 = clamp_slope(self.dw_values[i + 1], secant);
        hermite(t, w0, w1, d0 * self.dr, d1 * self.dr)
    }

    /// Evaluate w' at any radius (Hermite on w' with curvature from the ODE).
    pub fn eval_dw(&self, r: f64) -> f64 {
        let r = r.abs();
        if r > self.r_match {
            return -self.tail_coeff * (-r).exp() / r.sqrt() * (1.0 + 0.5 / r);
        }
        let (i, t) = self.locate(r);
        let dd0 = self.curvature(i);
        let dd1 = self.curvature(i + 1);
        hermite(
            t,
            self.dw_values[i],
            self.dw_values[i + 1],
            dd0 * self.dr,
            dd1 * self.dr,
        )
    }

    fn curvature(&self, i: usize) -> f64 {
        let r = self.r_nodes[i];
        let w = self.w_values[i];
        accel(r, w, self.dw_values[i])
    }

    fn locate(&self, r: f64) -> (usize, f64) {
        let pos = (r / self.dr).floor();
        let i = (pos as usize).min(self.r_nodes.len() - 2);
        let t = (r - self.r_nodes[i]) / self.dr;
        (i, t)
    }

    /// Trapezoid of f(r, w, w') over the integrated range [0, r_match].
    fn radial_integral<F>(&self, f: F) -> f64
    where
        F: Fn(f64, f64, f64) -> f64,
    {
        let vals: Vec<f64> = (0..=self.match_idx)
            .map(|i| f(self.r_nodes[i], self.w_values[i], self.dw_values[i]))
            .collect();
        trapezoid(&vals, self.dr)
    }
}

fn clamp_slope(d: f64, secant: f64) -> f64 {
    // Fritsch-Carlson safeguard: never let a derivative exceed 3x the secant
    // in magnitude or disagree with it in sign, which rules out overshoot.
    if secant == 0.0 {
        return 0.0;
    }
    let ratio = d / secant;
    if ratio <= 0.0 {
        0.0
    } else if ratio > 3.0 {
        3.0 * secant
    } else {
        d
    }
}

#[inline]
fn hermite(t: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    // m0, m1 are slopes already scaled by the interval length.
    let t2 = t * t;
    let t3 = t2 * t;
    y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * (t3 - 2.0 * t2 + t)
        + y1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * (t3 - t2)
}

/// Critical coupling a* = ‖w‖₂² = 2π ∫ r w² dr, with the analytic tail.
pub fn a_star(profile: &RadialProfile) -> f64 {
    let body = profile.radial_integral(|r, w, _| r * w * w);
    let c = profile.tail_coeff;
    let rm = profile.r_match;
    2.0 * PI * body + PI * c * c * (-2.0 * rm).exp()
}

/// Second moment ∫ |x|² w² dx = 2π ∫ r³ w² dr, with the analytic tail.
pub fn second_moment(profile: &RadialProfile) -> f64 {
    let body = profile.radial_integral(|r, w, _| r * r * r * w * w);
    let c = profile.tail_coeff;
    let rm = profile.r_match;
    let tail = c * c * (-2.0 * rm).exp() * (0.5 * rm * rm + 0.5 * rm + 0.25);
    2.0 * PI * (body + tail)
}

/// The three integrals of the scalar-field identities and their pairwise
/// relative deviations.
pub fn check_identities(profile: &RadialProfile) -> IdentityReport {
    let c = profile.tail_coeff;
    let rm = profile.r_match;
    let e2rm = (-2.0 * rm).exp();

    let grad_body = profile.radial_integral(|r, _, dw| r * dw * dw);
    // Tail of ∫ r w'² dr with w = C r^{-1/2} e^{-r}:
    // C² [ e^{-2R}(1/2 + 1/(4R)) + E1(2R)/2 ].
    let grad_tail = c * c * (e2rm * (0.5 + 0.25 / rm) + 0.5 * exp_integral_e1(2.0 * rm));
    let grad_sq = 2.0 * PI * (grad_body + grad_tail);

    let mass = a_star(profile);

    let quart_body = profile.radial_integral(|r, w, _| r * w.powi(4));
    let quart_tail = c.powi(4) * exp_integral_e1(4.0 * rm);
    let half_quartic = PI * (quart_body + quart_tail);

    let dev = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs());
    IdentityReport {
        grad_sq,
        mass,
        half_quartic,
        dev_grad_mass: dev(grad_sq, mass),
        dev_grad_quartic: dev(grad_sq, half_quartic),
        dev_mass_quartic: dev(mass, half_quartic),
    }
}

/// Evaluate w(|x|) at a list of planar points.
pub fn eval_w_2d(profile: &RadialProfile, points: &[[f64; 2]]) -> Vec<f64> {
    points
        .iter()
        .map(|p| profile.eval((p[0] * p[0] + p[1] * p[1]).sqrt()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    pub(crate) fn shared_profile() -> &'static RadialProfile {
        static CELL: OnceLock<RadialProfile> = OnceLock::new();
        CELL.get_or_init(|| solve_w(20.0, 1e-10).expect("solver"))
    }

    /// Independent oracle: shoot on the transformed system (w, z = r·w'),
    /// which removes the 1/r singularity, with a finer fixed-step RK4.
    fn oracle_amplitude() -> f64 {
        let h = 2.5e-4;
        let steps = (20.0 / h) as usize;
        let classify = |s: f64| -> bool {
            // true = overshoot
            let mut w = s;
            let mut z = 0.0_f64; // z = r w'
            let f = |r: f64, w: f64, z: f64| -> (f64, f64) {
                let wp = if r == 0.0 { 0.0 } else { z / r };
                (wp, r * (w - w * w * w))
            };
            for i in 0..steps {
                let r = i as f64 * h;
                let (k1w, k1z) = f(r, w, z);
                let (k2w, k2z) = f(r + 0.5 * h, w + 0.5 * h * k1w, z + 0.5 * h * k1z);
                let (k3w, k3z) = f(r + 0.5 * h, w + 0.5 * h * k2w, z + 0.5 * h * k2z);
                let (k4w, k4z) = f(r + h, w + h * k3w, z + h * k3z);
                w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
                z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
                if w <= 0.0 {
                    return true;
                }
                if r > h && z >= 0.0 {
                    return false;
                }
            }
            false
        };
        let (mut lo, mut hi) = (1.0, 4.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if classify(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn amplitude_matches_independent_integrator() {
        let p = shared_profile();
        let oracle = oracle_amplitude();
        assert!(
            (p.w0() - oracle).abs() < 1e-8,
            "w0 = {}, oracle = {}",
            p.w0(),
            oracle
        );
        assert!((p.w0() - 2.2062).abs() < 2e-4, "w0 = {}", p.w0());
    }

    #[test]
    fn derivative_vanishes_at_origin() {
        assert_eq!(shared_profile().dw_values[0], 0.0);
    }

    #[test]
    fn profile_positive_and_decreasing() {
        let p = shared_profile();
        for i in 1..p.w_values.len() {
            assert!(p.w_values[i] > 0.0);
            assert!(p.w_values[i] < p.w_values[i - 1]);
        }
    }

    #[test]
    fn tail_law_agrees_at_handover() {
        let p = shared_profile();
        let predicted = p.tail_coeff * (-p.r_match).exp() / p.r_match.sqrt();
        let actual = p.w_values[p.match_idx];
        assert!((predicted - actual).abs() / actual < 1e-6);
    }

    #[test]
    fn tail_log_law_constant() {
        let p = shared_profile();
        let q = |r: f64| (p.eval(r) * r.sqrt()).ln() + r;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut r = 10.0;
        while r <= 15.0 {
            let v = q(r);
            lo = lo.min(v);
            hi = hi.max(v);
            r += 0.1;
        }
        assert!(hi - lo < 1e-3, "spread {}", hi - lo);
    }

    #[test]
    fn ode_residual_below_tolerance() {
        assert!(shared_profile().max_ode_residual() < 1e-10);
    }

    #[test]
    fn w_small_at_r_max() {
        let p = shared_profile();
        assert!(*p.w_values.last().unwrap() < 1e-5);
    }

    #[test]
    fn a_star_value_and_grid_stability() {
        // Quadrature at two resolutions plus Richardson extrapolation is the
        // oracle; 11.7009 is its frozen output.
        let coarse = solve_w_with_nodes(20.0, 1e-8, 32769).unwrap();
        let fine = solve_w_with_nodes(20.0, 1e-10, 65537).unwrap();
        let a_c = a_star(&coarse);
        let a_f = a_star(&fine);
        let richardson = (4.0 * a_f - a_c) / 3.0;
        assert!((a_f - richardson).abs() / richardson < 1e-8);
        assert!((a_f - a_c).abs() / a_f < 1e-8, "delta {}", (a_f - a_c).abs());
        assert!((a_f - 11.7009).abs() < 2e-4, "a* = {a_f}");
        assert!(a_f > 0.0);
    }

    #[test]
    fn identities_hold_on_fine_profile() {
        let rep = check_identities(shared_profile());
        assert!(rep.max_deviation() < 1e-6, "deviation {}", rep.max_deviation());
        // Mass and a_star share the quadrature by construction.
        assert_eq!(rep.mass, a_star(shared_profile()));
    }

    #[test]
    fn identity_deviation_shrinks_with_refinement() {
        let c = solve_w_with_nodes(20.0, 1e-6, 8193).unwrap();
        let f = solve_w_with_nodes(20.0, 1e-6, 16385).unwrap();
        let dev_c = check_identities(&c).max_deviation();
        let dev_f = check_identities(&f).max_deviation();
        // Observed order at least 2 means a factor ~4 per halving.
        assert!(
            dev_c / dev_f > 3.0,
            "coarse {dev_c}, fine {dev_f} (ratio {})",
            dev_c / dev_f
        );
    }

    #[test]
    fn eval_2d_origin_and_symmetry() {
        let p = shared_profile();
        let at_origin = eval_w_2d(p, &[[0.0, 0.0]])[0];
        assert_eq!(at_origin, p.w0());
        let radius = 3.0;
        let vals: Vec<f64> = (0..16)
            .map(|k| {
                let th = k as f64 * std::f64::consts::TAU / 16.0;
                eval_w_2d(p, &[[radius * th.cos(), radius * th.sin()]])[0]
            })
            .collect();
        for v in &vals {
            assert!((v - vals[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_2d_far_field_uses_tail() {
        let p = shared_profile();
        let r = p.r_max() + 5.0;
        let v = eval_w_2d(p, &[[r, 0.0]])[0];
        assert!(v > 0.0 && v < 1e-7, "tail value {v}");
    }

    #[test]
    fn interpolation_matches_nodes_and_midpoints() {
        let p = shared_profile();
        // Node reproduction.
        for &i in &[0usize, 17, 501, 30011] {
            assert!((p.eval(p.r_nodes[i]) - p.w_values[i]).abs() < 1e-14);
        }
        // Midpoint accuracy on a solve at doubled spacing.
        let coarse = solve_w_with_nodes(20.0, 1e-8, 32769).unwrap();
        for &i in &[10usize, 1000, 20000] {
            let r = 0.5 * (coarse.r_nodes[i] + coarse.r_nodes[i + 1]);
            assert!((coarse.eval(r) - p.eval(r)).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            solve_w(10.0, 1e-10),
            Err(TownesError::InvalidInput(_))
        ));
        assert!(matches!(
            solve_w(20.0, 1e-3),
            Err(TownesError::InvalidInput(_))
        ));
    }
}
