//! Concentration data for the blow-up limit: the averaged trap
//! H(y) = ∫ h(x+y) w²(x) dx, its critical point y₀ with the non-degeneracy
//! matrix, the constant λ, and the blow-up length scale α_a.

use crate::quadrature::{graded_axis, uniform_axis, AxisRule};
use crate::townes::{a_star, second_moment, RadialProfile};
use crate::trap::HomogeneousFn;
use rayon::prelude::*;
use thiserror::Error;

/// Interval count of the uniform tensor rule used for H and its gradient.
const H_RESOLUTION: usize = 2048;
/// Per-side node count of the graded rule used for the non-degeneracy matrix.
const MATRIX_RESOLUTION: usize = 2048;

#[derive(Debug, Error)]
pub enum ConcentrationError {
    #[error("no-critical-point: Newton iteration did not converge ({0})")]
    NoCriticalPoint(String),
    #[error("degenerate-critical-point: |det| = {det:.3e} below threshold {threshold:.3e}")]
    DegenerateCriticalPoint { det: f64, threshold: f64 },
    #[error("invalid-lambda: radicand {0:.3e} is not positive")]
    InvalidLambda(f64),
    #[error("supercritical-coupling: a = {a} is not below a* = {a_star}")]
    SupercriticalCoupling { a: f64, a_star: f64 },
}

/// H(y) together with a two-resolution error estimate.
#[derive(Debug, Clone, Copy)]
pub struct HValue {
    pub value: f64,
    pub error_estimate: f64,
}

/// Critical point and non-degeneracy matrix of H.
#[derive(Debug, Clone, Copy)]
pub struct CriticalPoint {
    pub y0: [f64; 2],
    /// M_{lj} = ∫ ∂h/∂x_j(x+y₀) ∂w²/∂x_l(x) dx
    pub nondeg_matrix: [[f64; 2]; 2],
    pub det: f64,
    pub grad_norm: f64,
    pub h_at_y0: f64,
}

/// Aggregate used downstream: critical point data plus λ and the degree.
#[derive(Debug, Clone, Copy)]
pub struct ConcentrationData {
    pub y0: [f64; 2],
    pub nondeg_matrix: [[f64; 2]; 2],
    pub det: f64,
    pub lambda: f64,
    pub p: f64,
}

impl ConcentrationData {
    /// Run the full pipeline for a homogeneous part at rotation `omega`.
    pub fn compute(
        h: &HomogeneousFn,
        omega: f64,
        profile: &RadialProfile,
    ) -> Result<Self, ConcentrationError> {
        let cp = find_y0(h, profile)?;
        let lambda = lambda_const(h, omega, h.degree, cp.y0, profile)?;
        Ok(ConcentrationData {
            y0: cp.y0,
            nondeg_matrix: cp.nondeg_matrix,
            det: cp.det,
            lambda,
            p: h.degree,
        })
    }
}

/// ∂w²/∂x_l = 2 w w' x_l / r, regular (zero) at the origin.
#[inline]
pub(crate) fn grad_w_sq(profile: &RadialProfile, x: f64, y: f64) -> [f64; 2] {
    let r = (x * x + y * y).sqrt();
    if r == 0.0 {
        return [0.0, 0.0];
    }
    let f = 2.0 * profile.eval(r) * profile.eval_dw(r) / r;
    [f * x, f * y]
}

fn tensor_sum<const K: usize, F>(ax: &AxisRule, ay: &AxisRule, f: F) -> [f64; K]
where
    F: Fn(f64, f64) -> [f64; K] + Sync,
{
    let rows: Vec<[f64; K]> = ay
        .nodes
        .par_iter()
        .zip(ay.weights.par_iter())
        .map(|(&y, &wy)| {
            let mut acc = [0.0; K];
            for (&x, &wx) in ax.nodes.iter().zip(ax.weights.iter()) {
                let vals = f(x, y);
                for k in 0..K {
                    acc[k] += wx * vals[k];
                }
            }
            for a in acc.iter_mut() {
                *a *= wy;
            }
            acc
        })
        .collect();
    let mut total = [0.0; K];
    for row in rows {
        for k in 0..K {
            total[k] += row[k];
        }
    }
    total
}

fn h_value_at_resolution(
    h: &HomogeneousFn,
    y: [f64; 2],
    profile: &RadialProfile,
    n: usize,
) -> f64 {
    let ax = uniform_axis(profile.r_max(), n);
    let [v] = tensor_sum(&ax, &ax, |px, py| {
        let w = profile.eval((px * px + py * py).sqrt());
        [h.eval(px + y[0], py + y[1]) * w * w]
    });
    v
}

/// Tensor-grid quadrature of h(x+y)w²(x) over the square of half-width r_max,
/// with an error estimate from comparing two resolutions.
pub fn h_value(h: &HomogeneousFn, y: [f64; 2], profile: &RadialProfile) -> HValue {
    let fine = h_value_at_resolution(h, y, profile, H_RESOLUTION);
    let coarse = h_value_at_resolution(h, y, profile, H_RESOLUTION / 2);
    HValue {
        value: fine,
        error_estimate: (fine - coarse).abs(),
    }
}

/// ∇H(y) = ∫ ∇h(x+y) w²(x) dx along with H(y) itself.
fn h_gradient(h: &HomogeneousFn, y: [f64; 2], profile: &RadialProfile) -> ([f64; 2], f64) {
    let ax = uniform_axis(profile.r_max(), H_RESOLUTION);
    let [gx, gy, hv] = tensor_sum(&ax, &ax, |px, py| {
        let w = profile.eval((px * px + py * py).sqrt());
        let w2 = w * w;
        let g = h.grad(px + y[0], py + y[1]);
        [g[0] * w2, g[1] * w2, h.eval(px + y[0], py + y[1]) * w2]
    });
    ([gx, gy], hv)
}

fn matrix_axis(profile: &RadialProfile, cusp: bool, cusp_at: f64) -> AxisRule {
    if cusp {
        graded_axis(profile.r_max(), MATRIX_RESOLUTION, cusp_at, 4)
    } else {
        uniform_axis(profile.r_max(), 2 * MATRIX_RESOLUTION)
    }
}

/// The (s.8) matrix M_{lj} = ∫ ∂h/∂x_j(x+y₀) ∂w²/∂x_l(x) dx by tensor
/// quadrature, graded along axes where ∇h has a cusp.
fn nondeg_matrix(h: &HomogeneousFn, y0: [f64; 2], profile: &RadialProfile) -> [[f64; 2]; 2] {
    let cusps = h.cusp_axes();
    let ax = matrix_axis(profile, cusps[0], -y0[0]);
    let ay = matrix_axis(profile, cusps[1], -y0[1]);
    let [m00, m01, m10, m11] = tensor_sum(&ax, &ay, |px, py| {
        let gh = h.grad(px + y0[0], py + y0[1]);
        let gw = grad_w_sq(profile, px, py);
        [gw[0] * gh[0], gw[0] * gh[1], gw[1] * gh[0], gw[1] * gh[1]]
    });
    [[m00, m01], [m10, m11]]
}

fn det2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Damped Newton iteration on ∇H from the origin; returns the critical point
/// and the non-degeneracy matrix evaluated there.
pub fn find_y0(h: &HomogeneousFn, profile: &RadialProfile) -> Result<CriticalPoint, ConcentrationError> {
    let mut y = [0.0_f64, 0.0];
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    let mut h_at = 0.0;
    for _ in 0..50 {
        let (g, hv) = h_gradient(h, y, profile);
        h_at = hv;
        grad_norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if grad_norm < 1e-9 * (1.0 + hv.abs()) {
            converged = true;
            break;
        }
        // Hessian of H at y equals minus the (s.8)-type matrix shifted to y.
        let m = nondeg_matrix(h, y, profile);
        let hess = [[-m[0][0], -m[0][1]], [-m[1][0], -m[1][1]]];
        let det = det2(&hess);
        if det.abs() < 1e-14 {
            return Err(ConcentrationError::NoCriticalPoint(
                "singular Hessian during Newton".into(),
            ));
        }
        let mut dx = [
            -(hess[1][1] * g[0] - hess[0][1] * g[1]) / det,
            -(-hess[1][0] * g[0] + hess[0][0] * g[1]) / det,
        ];
        // Step damping: halve until the gradient norm decreases.
        let mut accepted = false;
        for _ in 0..30 {
            let trial = [y[0] + dx[0], y[1] + dx[1]];
            let (gt, _) = h_gradient(h, trial, profile);
            if (gt[0] * gt[0] + gt[1] * gt[1]).sqrt() < grad_norm {
                y = trial;
                accepted = true;
                break;
            }
            dx = [0.5 * dx[0], 0.5 * dx[1]];
        }
        if !accepted {
            return Err(ConcentrationError::NoCriticalPoint(
                "damped step failed to reduce |grad H|".into(),
            ));
        }
    }
    if !converged {
        return Err(ConcentrationError::NoCriticalPoint(format!(
            "|grad H| = {grad_norm:.3e} after max iterations"
        )));
    }

    let m = nondeg_matrix(h, y, profile);
    let det = det2(&m);
    let norm_inf = m
        .iter()
        .map(|row| row[0].abs() + row[1].abs())
        .fold(0.0_f64, f64::max);
    let threshold = 1e-10 * norm_inf * norm_inf;
    if det.abs() < threshold {
        return Err(ConcentrationError::DegenerateCriticalPoint { det, threshold });
    }
    Ok(CriticalPoint {
        y0: y,
        nondeg_matrix: m,
        det,
        grad_norm,
        h_at_y0: h_at,
    })
}

/// The constant λ: [p/2 · H(y₀)]^{1/(2+p)} for p < 2, and
/// [H(y₀) + (Ω²/4)∫|x|²w²]^{1/4} for p = 2.
pub fn lambda_const(
    h: &HomogeneousFn,
    omega: f64,
    p: f64,
    y0: [f64; 2],
    profile: &RadialProfile,
) -> Result<f64, ConcentrationError> {
    let hv = h_value(h, y0, profile).value;
    let radicand = if p < 2.0 {
        0.5 * p * hv
    } else {
        hv + 0.25 * omega * omega * second_moment(profile)
    };
    if radicand <= 0.0 {
        return Err(ConcentrationError::InvalidLambda(radicand));
    }
    Ok(radicand.powf(1.0 / (2.0 + p)))
}

/// Blow-up length scale α_a = (a*-a)^{1/(2+p)} / λ.
pub fn alpha_of_a(a: f64, a_star: f64, lambda: f64, p: f64) -> Result<f64, ConcentrationError> {
    if !(0.0..a_star).contains(&a) {
        return Err(ConcentrationError::SupercriticalCoupling { a, a_star });
    }
    Ok((a_star - a).powf(1.0 / (2.0 + p)) / lambda)
}

/// Convenience used by reports: α over a list of couplings.
pub fn alpha_table(
    fractions: &[f64],
    a_star_val: f64,
    lambda: f64,
    p: f64,
) -> Vec<(f64, f64)> {
    fractions
        .iter()
        .map(|&f| {
            let a = f * a_star_val;
            (a, alpha_of_a(a, a_star_val, lambda, p).unwrap())
        })
        .collect()
}

#[allow(unused)]
fn a_star_of(profile: &RadialProfile) -> f64 {
    a_star(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::trapezoid;
    use crate::townes::{self, solve_w};
    use crate::trap::{homogeneous_part, TrapSpec};
    use std::sync::OnceLock;

    fn profile() -> &'static RadialProfile {
        static CELL: OnceLock<RadialProfile> = OnceLock::new();
        CELL.get_or_init(|| solve_w(20.0, 1e-10).expect("solver"))
    }

    fn harmonic_h(omega: f64) -> HomogeneousFn {
        homogeneous_part(&TrapSpec::new(2.0, 0.0, 0.0).unwrap(), omega).unwrap()
    }

    #[test]
    fn h_value_matches_radial_oracle_for_harmonic() {
        // h = 0.75|x|² at Omega = 1; oracle is the radial second moment.
        let h = harmonic_h(1.0);
        let hv = h_value(&h, [0.0, 0.0], profile());
        let oracle = 0.75 * second_moment(profile());
        assert!(
            (hv.value - oracle).abs() < 1e-6 * oracle,
            "2-D {} vs radial {}",
            hv.value,
            oracle
        );
        assert!(hv.error_estimate < 1e-8 * oracle);
    }

    #[test]
    fn h_value_even_and_growing() {
        let t = TrapSpec::new(1.5, 1.0, 0.5).unwrap();
        let h = homogeneous_part(&t, 1.0).unwrap();
        let plus = h_value(&h, [0.7, -0.4], profile()).value;
        let minus = h_value(&h, [-0.7, 0.4], profile()).value;
        assert!((plus - minus).abs() < 1e-10 * plus);
        let center = h_value(&h, [0.0, 0.0], profile()).value;
        let far = h_value(&h, [5.0, 0.0], profile()).value;
        assert!(far > center);
    }

    #[test]
    fn h_value_refinement_order_at_least_two() {
        let t = TrapSpec::new(1.5, 1.0, 1.0).unwrap();
        let h = homogeneous_part(&t, 1.0).unwrap();
        let v256 = h_value_at_resolution(&h, [0.0, 0.0], profile(), 256);
        let v512 = h_value_at_resolution(&h, [0.0, 0.0], profile(), 512);
        let v1024 = h_value_at_resolution(&h, [0.0, 0.0], profile(), 1024);
        let e_coarse = (v256 - v1024).abs();
        let e_fine = (v512 - v1024).abs();
        assert!(
            e_coarse / e_fine > 3.5,
            "coarse err {e_coarse}, fine err {e_fine}"
        );
    }

    #[test]
    fn y0_at_origin_for_built_in_traps() {
        for spec in [
            TrapSpec::new(2.0, 0.5, 0.0).unwrap(),
            TrapSpec::new(1.5, 1.0, 1.0).unwrap(),
        ] {
            let h = homogeneous_part(&spec, 1.0).unwrap();
            let cp = find_y0(&h, profile()).unwrap();
            let norm = (cp.y0[0] * cp.y0[0] + cp.y0[1] * cp.y0[1]).sqrt();
            assert!(norm < 1e-8, "y0 = {:?}", cp.y0);
            assert!(cp.det.abs() > 0.0);
            assert!(cp.grad_norm < 1e-9 * (1.0 + cp.h_at_y0.abs()));
        }
    }

    #[test]
    fn nondeg_matrix_harmonic_is_minus_two_a_star() {
        // Integration by parts: ∫ 2x_l ∂w²/∂x_l = -2∫w², so the matrix for
        // h = |x|² is diag(-2a*, -2a*).
        let h = harmonic_h(0.0);
        let cp = find_y0(&h, profile()).unwrap();
        let target = -2.0 * a_star(profile());
        for l in 0..2 {
            for j in 0..2 {
                let want = if l == j { target } else { 0.0 };
                assert!(
                    (cp.nondeg_matrix[l][j] - want).abs() < 1e-6,
                    "M[{l}][{j}] = {} vs {want}",
                    cp.nondeg_matrix[l][j]
                );
            }
        }
    }

    #[test]
    fn off_diagonals_vanish_for_separable_even_h() {
        let t = TrapSpec::new(1.5, 1.0, 0.5).unwrap();
        let h = homogeneous_part(&t, 1.0).unwrap();
        let cp = find_y0(&h, profile()).unwrap();
        assert!(cp.nondeg_matrix[0][1].abs() < 1e-8);
        assert!(cp.nondeg_matrix[1][0].abs() < 1e-8);
    }

    #[test]
    fn lambda_omega_independent_for_p2() {
        // h + Ω²|x|²/4 = |x|² + a₁x₁² + a₂x₂² regardless of Ω.
        let spec = TrapSpec::new(2.0, 0.0, 0.0).unwrap();
        let p = profile();
        let l0 = lambda_const(
            &homogeneous_part(&spec, 0.0).unwrap(),
            0.0,
            2.0,
            [0.0, 0.0],
            p,
        )
        .unwrap();
        let l1 = lambda_const(
            &homogeneous_part(&spec, 1.3).unwrap(),
            1.3,
            2.0,
            [0.0, 0.0],
            p,
        )
        .unwrap();
        assert!((l0 - l1).abs() < 1e-9 * l0, "{l0} vs {l1}");
        // And equals (∫|x|²w²)^{1/4}.
        let i2 = second_moment(p);
        assert!((l0 - i2.powf(0.25)).abs() < 1e-6 * l0);
    }

    #[test]
    fn lambda_p15_matches_separated_oracle() {
        // λ = [0.75 ∫(|x₁|^1.5 + |x₂|^1.5) w²]^{2/7}; the oracle separates the
        // integral into an angular constant times a radial moment.
        let spec = TrapSpec::new(1.5, 1.0, 1.0).unwrap();
        let h = homogeneous_part(&spec, 1.0).unwrap();
        let p = profile();
        let lam = lambda_const(&h, 1.0, 1.5, [0.0, 0.0], p).unwrap();

        let n_ang = 200_000;
        let dth = std::f64::consts::TAU / n_ang as f64;
        let angular: f64 = (0..n_ang)
            .map(|k| (k as f64 * dth).cos().abs().powf(1.5) * dth)
            .sum();
        let radial: Vec<f64> = p
            .r_nodes
            .iter()
            .zip(&p.w_values)
            .map(|(&r, &w)| r.powf(2.5) * w * w)
            .collect();
        let rad = trapezoid(&radial, p.spacing());
        let integral = 2.0 * angular * rad; // both axes contribute equally
        let oracle = (0.75 * integral).powf(2.0 / 3.5);
        assert!(
            (lam - oracle).abs() < 1e-4 * oracle,
            "lambda {lam} vs oracle {oracle}"
        );
    }

    #[test]
    fn lambda_symmetric_under_weight_swap() {
        let pa = TrapSpec::new(1.5, 1.0, 0.25).unwrap();
        let pb = TrapSpec::new(1.5, 0.25, 1.0).unwrap();
        let p = profile();
        let la = lambda_const(
            &homogeneous_part(&pa, 1.0).unwrap(),
            1.0,
            1.5,
            [0.0, 0.0],
            p,
        )
        .unwrap();
        let lb = lambda_const(
            &homogeneous_part(&pb, 1.0).unwrap(),
            1.0,
            1.5,
            [0.0, 0.0],
            p,
        )
        .unwrap();
        assert!((la - lb).abs() < 1e-10 * la);
    }

    #[test]
    fn alpha_algebra() {
        let a_star_val = 11.7;
        let lambda = 1.9;
        let p = 2.0;
        let a = a_star_val - 1e-4;
        let alpha = alpha_of_a(a, a_star_val, lambda, p).unwrap();
        assert!((alpha.powi(4) * lambda.powi(4) - (a_star_val - a)).abs() < 1e-15);
        assert!((alpha - 0.1 / lambda).abs() < 1e-12);
        // Vanishing numerator.
        let tiny = alpha_of_a(a_star_val - 1e-12, a_star_val, lambda, p).unwrap();
        assert!(tiny < 1e-3);
        assert!(matches!(
            alpha_of_a(a_star_val, a_star_val, lambda, p),
            Err(ConcentrationError::SupercriticalCoupling { .. })
        ));
    }
}
