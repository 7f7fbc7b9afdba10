//! Trap family V(x) = |x|² + a₁|x₁|^p + a₂|x₂|^p, its effective potential
//! after completing the rotational square, the homogeneous part near the
//! origin, and the critical rotational velocity.

use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrapError {
    #[error("invalid trap: {0}")]
    InvalidSpec(String),
    #[error("supercritical-velocity: Omega = {omega} is not below Omega* = {omega_star}")]
    SupercriticalVelocity { omega: f64, omega_star: f64 },
    #[error("h-identically-zero: p < 2 with a1 = a2 = 0 has no coercive homogeneous part")]
    HIdenticallyZero,
    #[error("assumption (V) violated: {clause}")]
    AssumptionViolated { clause: String },
}

/// User-supplied homogeneous function with its gradient and declared data.
pub struct CustomH {
    pub degree: f64,
    pub omega_star: f64,
    pub eval: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub grad: Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>,
}

impl Clone for CustomH {
    fn clone(&self) -> Self {
        CustomH {
            degree: self.degree,
            omega_star: self.omega_star,
            eval: Arc::clone(&self.eval),
            grad: Arc::clone(&self.grad),
        }
    }
}

impl std::fmt::Debug for CustomH {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CustomH")
            .field("degree", &self.degree)
            .field("omega_star", &self.omega_star)
            .finish()
    }
}

/// Trap specification: degree p in (1, 2], nonnegative axis weights, and an
/// optional custom homogeneous part replacing the built-in power sum.
#[derive(Debug, Clone)]
pub struct TrapSpec {
    pub p: f64,
    pub a1: f64,
    pub a2: f64,
    pub custom_h: Option<CustomH>,
}

impl TrapSpec {
    pub fn new(p: f64, a1: f64, a2: f64) -> Result<Self, TrapError> {
        if !(p > 1.0 && p <= 2.0) {
            return Err(TrapError::InvalidSpec(format!("p = {p} outside (1, 2]")));
        }
        if a1 < 0.0 || a2 < 0.0 {
            return Err(TrapError::InvalidSpec("negative axis weight".into()));
        }
        Ok(TrapSpec {
            p,
            a1,
            a2,
            custom_h: None,
        })
    }

    /// Attach a custom homogeneous part; its homogeneity is verified by
    /// sampling h(t·x) = t^p h(x) at a few scales and directions.
    pub fn with_custom_h(mut self, custom: CustomH) -> Result<Self, TrapError> {
        if !(custom.degree > 1.0 && custom.degree <= 2.0) {
            return Err(TrapError::InvalidSpec(format!(
                "custom degree {} outside (1, 2]",
                custom.degree
            )));
        }
        for &t in &[0.5, 2.0, 3.7] {
            for k in 0..8 {
                let th = k as f64 * std::f64::consts::TAU / 8.0 + 0.1;
                let (x, y) = (th.cos(), th.sin());
                let lhs = (custom.eval)(t * x, t * y);
                let rhs = t.powf(custom.degree) * (custom.eval)(x, y);
                if (lhs - rhs).abs() > 1e-10 * (1.0 + rhs.abs()) {
                    return Err(TrapError::InvalidSpec(format!(
                        "custom h is not homogeneous of degree {} at t = {t}",
                        custom.degree
                    )));
                }
            }
        }
        self.p = custom.degree;
        self.custom_h = Some(custom);
        Ok(self)
    }
}

/// V(x) = |x|² + a₁|x₁|^p + a₂|x₂|^p (or |x|² + custom h).
pub fn eval_v(trap: &TrapSpec, x: [f64; 2]) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    match &trap.custom_h {
        Some(c) => r2 + (c.eval)(x[0], x[1]),
        None => r2 + trap.a1 * x[0].abs().powf(trap.p) + trap.a2 * x[1].abs().powf(trap.p),
    }
}

fn grad_v(trap: &TrapSpec, x: [f64; 2]) -> [f64; 2] {
    let mut g = [2.0 * x[0], 2.0 * x[1]];
    match &trap.custom_h {
        Some(c) => {
            let gh = (c.grad)(x[0], x[1]);
            g[0] += gh[0];
            g[1] += gh[1];
        }
        None => {
            g[0] += trap.a1 * abs_pow_grad(x[0], trap.p);
            g[1] += trap.a2 * abs_pow_grad(x[1], trap.p);
        }
    }
    g
}

/// d/dt |t|^p = p·sign(t)·|t|^{p-1}, defined as 0 at t = 0 for p > 1.
#[inline]
fn abs_pow_grad(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        p * t.signum() * t.abs().powf(p - 1.0)
    }
}

/// Critical rotational velocity: the supremum of Ω keeping V - Ω²|x|²/4
/// coercive. Closed form for the built-in family, declared for custom h.
pub fn omega_star(trap: &TrapSpec) -> f64 {
    if let Some(c) = &trap.custom_h {
        return c.omega_star;
    }
    if trap.p < 2.0 {
        2.0
    } else {
        2.0 * (1.0 + trap.a1.min(trap.a2)).sqrt()
    }
}

/// Effective potential V_Ω(x) = V(x) - Ω²|x|²/4.
pub fn eval_v_omega(trap: &TrapSpec, omega: f64, x: [f64; 2]) -> Result<f64, TrapError> {
    check_velocity(trap, omega)?;
    Ok(v_omega_unchecked(trap, omega, x))
}

pub(crate) fn v_omega_unchecked(trap: &TrapSpec, omega: f64, x: [f64; 2]) -> f64 {
    eval_v(trap, x) - 0.25 * omega * omega * (x[0] * x[0] + x[1] * x[1])
}

/// Analytic gradient of the effective potential.
pub fn grad_v_omega(trap: &TrapSpec, omega: f64, x: [f64; 2]) -> Result<[f64; 2], TrapError> {
    check_velocity(trap, omega)?;
    let g = grad_v(trap, x);
    let s = 0.5 * omega * omega;
    Ok([g[0] - s * x[0], g[1] - s * x[1]])
}

fn check_velocity(trap: &TrapSpec, omega: f64) -> Result<(), TrapError> {
    let os = omega_star(trap);
    if omega < 0.0 || omega >= os {
        return Err(TrapError::SupercriticalVelocity {
            omega,
            omega_star: os,
        });
    }
    Ok(())
}

/// Homogeneous function handle with evaluation and gradient.
#[derive(Debug, Clone)]
pub struct HomogeneousFn {
    pub degree: f64,
    kind: HKind,
}

#[derive(Debug, Clone)]
enum HKind {
    /// a₁|x₁|^p + a₂|x₂|^p
    PowerSum { p: f64, a1: f64, a2: f64 },
    /// c|x|² + a₁x₁² + a₂x₂²
    Quadratic { c_iso: f64, a1: f64, a2: f64 },
    Custom(CustomH),
}

impl HomogeneousFn {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            HKind::PowerSum { p, a1, a2 } => a1 * x.abs().powf(*p) + a2 * y.abs().powf(*p),
            HKind::Quadratic { c_iso, a1, a2 } => {
                c_iso * (x * x + y * y) + a1 * x * x + a2 * y * y
            }
            HKind::Custom(c) => (c.eval)(x, y),
        }
    }

    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        match &self.kind {
            HKind::PowerSum { p, a1, a2 } => {
                [a1 * abs_pow_grad(x, *p), a2 * abs_pow_grad(y, *p)]
            }
            HKind::Quadratic { c_iso, a1, a2 } => [
                2.0 * c_iso * x + 2.0 * a1 * x,
                2.0 * c_iso * y + 2.0 * a2 * y,
            ],
            HKind::Custom(c) => (c.grad)(x, y),
        }
    }

    /// Axes along which the gradient has an algebraic cusp (|x_j|^{p-1} with
    /// p < 2); quadrature rules grade these directions.
    pub fn cusp_axes(&self) -> [bool; 2] {
        match &self.kind {
            HKind::PowerSum { a1, a2, .. } => [*a1 > 0.0, *a2 > 0.0],
            _ => [false, false],
        }
    }
}

/// The homogeneous part of V_Ω near the origin: the power sum itself when
/// p < 2, the full quadratic form (including the rotational shift) when p = 2.
pub fn homogeneous_part(trap: &TrapSpec, omega: f64) -> Result<HomogeneousFn, TrapError> {
    check_velocity(trap, omega)?;
    if let Some(c) = &trap.custom_h {
        if c.degree < 2.0 {
            return Ok(HomogeneousFn {
                degree: c.degree,
                kind: HKind::Custom(c.clone()),
            });
        }
        // Degree-2 custom parts absorb the rotational shift like the built-in.
        let shifted = c.clone();
        let base = Arc::clone(&shifted.eval);
        let base_grad = Arc::clone(&shifted.grad);
        let s = 1.0 - 0.25 * omega * omega;
        return Ok(HomogeneousFn {
            degree: 2.0,
            kind: HKind::Custom(CustomH {
                degree: 2.0,
                omega_star: c.omega_star,
                eval: Arc::new(move |x, y| s * (x * x + y * y) + base(x, y)),
                grad: Arc::new(move |x, y| {
                    let g = base_grad(x, y);
                    [2.0 * s * x + g[0], 2.0 * s * y + g[1]]
                }),
            }),
        });
    }
    if trap.p < 2.0 {
        if trap.a1 == 0.0 && trap.a2 == 0.0 {
            return Err(TrapError::HIdenticallyZero);
        }
        Ok(HomogeneousFn {
            degree: trap.p,
            kind: HKind::PowerSum {
                p: trap.p,
                a1: trap.a1,
                a2: trap.a2,
            },
        })
    } else {
        Ok(HomogeneousFn {
            degree: 2.0,
            kind: HKind::Quadratic {
                c_iso: 1.0 - 0.25 * omega * omega,
                a1: trap.a1,
                a2: trap.a2,
            },
        })
    }
}

/// Validation report for assumption (V): V_Ω vanishes only at the origin and
/// matches its homogeneous part to o(|x|^p) near zero.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub v_omega_at_origin: f64,
    pub min_on_rings: f64,
    pub remainder_ratios: Vec<(f64, f64)>,
}

/// Sample V_Ω on rings to confirm the zero set is {0}, that it grows along
/// rays, and that (V_Ω - h)/|x|^p vanishes on shrinking rings.
pub fn validate_assumption_v(trap: &TrapSpec, omega: f64) -> Result<AssumptionReport, TrapError> {
    let v0 = v_omega_unchecked(trap, omega, [0.0, 0.0]);
    if v0.abs() > 1e-12 {
        return Err(TrapError::AssumptionViolated {
            clause: format!("V_Omega(0) = {v0}, expected 0"),
        });
    }

    let angles: Vec<f64> = (0..32)
        .map(|k| k as f64 * std::f64::consts::TAU / 32.0 + 0.01)
        .collect();
    let mut min_on_rings = f64::INFINITY;
    for &radius in &[0.5, 1.0, 2.0, 5.0, 10.0, 100.0] {
        for &th in &angles {
            let x = [radius * th.cos(), radius * th.sin()];
            let v = v_omega_unchecked(trap, omega, x);
            min_on_rings = min_on_rings.min(v);
            if v <= 0.0 {
                return Err(TrapError::AssumptionViolated {
                    clause: format!(
                        "zero set of V_Omega is not {{0}}: V_Omega({:.3}, {:.3}) = {v:.3e}",
                        x[0], x[1]
                    ),
                });
            }
        }
    }

    // Growth along rays: values at |x| = 100 must dominate |x| = 10.
    for &th in angles.iter().step_by(4) {
        let near = v_omega_unchecked(trap, omega, [10.0 * th.cos(), 10.0 * th.sin()]);
        let far = v_omega_unchecked(trap, omega, [100.0 * th.cos(), 100.0 * th.sin()]);
        if far <= near {
            return Err(TrapError::AssumptionViolated {
                clause: format!("V_Omega not growing along the ray at angle {th:.3}"),
            });
        }
    }

    let h = homogeneous_part(trap, omega)?;
    let mut ratios = Vec::new();
    for &radius in &[1e-1, 1e-2, 1e-3] {
        let mut worst = 0.0_f64;
        for &th in &angles {
            let x = [radius * th.cos(), radius * th.sin()];
            let v = v_omega_unchecked(trap, omega, x);
            let hv = h.eval(x[0], x[1]);
            worst = worst.max((v - hv).abs() / radius.powf(h.degree));
        }
        ratios.push((radius, worst));
    }
    let vanishing = ratios.windows(2).all(|w| w[1].1 < w[0].1 + 1e-12)
        && (ratios.last().unwrap().1 < 0.1 || ratios.iter().all(|r| r.1 < 1e-12));
    if !vanishing {
        return Err(TrapError::AssumptionViolated {
            clause: format!(
                "(V_Omega - h)/|x|^p does not vanish near 0: ratios {:?}",
                ratios
            ),
        });
    }

    Ok(AssumptionReport {
        v_omega_at_origin: v0,
        min_on_rings,
        remainder_ratios: ratios,
    })
}
