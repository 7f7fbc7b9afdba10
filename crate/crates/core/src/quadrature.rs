//! Quadrature building blocks shared by the radial and planar integrals:
//! composite trapezoid sums, tensor-product rules with optional cusp-graded
//! axes, and the exponential integral used by analytic tail corrections.

/// Composite trapezoid on a uniform grid with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (0.5 * (values[0] + values[values.len() - 1]) + inner)
}

/// Exponential integral E1(x) = ∫_x^∞ e^{-t}/t dt for x > 0.
///
/// Power series below x = 4, modified Lentz continued fraction above.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires a positive argument");
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    if x <= 4.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..=60 {
            term *= -x / k as f64;
            let delta = -term / k as f64;
            sum += delta;
            if delta.abs() < 1e-18 * (1.0 + sum.abs()) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() + sum
    } else {
        // E1(x) = e^{-x} * cf, cf = 1/(x+1 - 1^2/(x+3 - 2^2/(x+5 - ...))).
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut f = d;
        for k in 1..=100u64 {
            let a = -((k * k) as f64);
            b += 2.0;
            d = 1.0 / (b + a * d);
            c = b + a / c;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x).exp() * f
    }
}

/// A 1-D quadrature rule given by explicit nodes and weights.
#[derive(Debug, Clone)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Uniform trapezoid rule on `[-half_width, half_width]` with `n` intervals.
pub fn uniform_axis(half_width: f64, n: usize) -> AxisRule {
    let h = 2.0 * half_width / n as f64;
    let mut nodes = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n + 1);
    for i in 0..=n {
        nodes.push(-half_width + i as f64 * h);
        let w = if i == 0 || i == n { 0.5 * h } else { h };
        weights.push(w);
    }
    AxisRule { nodes, weights }
}

/// Trapezoid rule on `[-half_width, half_width]` graded around an interior
/// algebraic cusp at `cusp`: each side is mapped by y = cusp ± s^m so that
/// |y - cusp|^q factors become smooth in s.
pub fn graded_axis(half_width: f64, n_per_side: usize, cusp: f64, m: u32) -> AxisRule {
    assert!(
        cusp.abs() < half_width,
        "cusp must lie inside the integration interval"
    );
    let m_f = m as f64;
    let mut nodes = Vec::with_capacity(2 * n_per_side + 2);
    let mut weights = Vec::with_capacity(2 * n_per_side + 2);
    for &sign in &[-1.0_f64, 1.0] {
        let span: f64 = if sign < 0.0 {
            cusp + half_width
        } else {
            half_width - cusp
        };
        let s_end = span.powf(1.0 / m_f);
        let hs = s_end / n_per_side as f64;
        for i in 0..=n_per_side {
            let s = i as f64 * hs;
            let trap = if i == 0 || i == n_per_side {
                0.5 * hs
            } else {
                hs
            };
            nodes.push(cusp + sign * s.powi(m as i32));
            weights.push(trap * m_f * s.powi(m as i32 - 1));
        }
    }
    AxisRule { nodes, weights }
}

/// Tensor-product integral of `f` over the two axis rules.
pub fn tensor_integrate<F>(ax: &AxisRule, ay: &AxisRule, f: F) -> f64
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    use rayon::prelude::*;
    // Row sums are produced independently and combined in index order, so the
    // result does not depend on the parallel schedule.
    let row_sums: Vec<f64> = ay
        .nodes
        .par_iter()
        .zip(ay.weights.par_iter())
        .map(|(&y, &wy)| {
            let mut acc = 0.0;
            for (&x, &wx) in ax.nodes.iter().zip(ax.weights.iter()) {
                acc += wx * f(x, y);
            }
            acc * wy
        })
        .collect();
    row_sums.iter().sum()
}
