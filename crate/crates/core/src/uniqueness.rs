//! Numerical probes of local uniqueness: multi-start minimization compared
//! through phase-modded distances, the difference-field decomposition onto
//! the kernel modes {w + x·∇w, ∂₁w, ∂₂w}, and the Pohozaev matrix.

use crate::asymptotics::{rescale_with, AlignedProfile, AsymptoticsError};
use crate::concentration::{alpha_of_a, grad_w_sq, ConcentrationData};
use crate::field::ComplexField;
use crate::gp2d::{self, GroundState, Init, MinimizeOpts};
use crate::grid::Grid2D;
use crate::quadrature::{graded_axis, uniform_axis, AxisRule};
use crate::townes::{a_star, RadialProfile};
use crate::trap::{HomogeneousFn, TrapSpec};
use rayon::prelude::*;
use thiserror::Error;

/// L² distance below which two phase-aligned minimizers count as identical.
pub const UNIQUENESS_THRESHOLD: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum UniquenessError {
    #[error("grid-mismatch: fields live on different grids")]
    GridMismatch,
    #[error("degenerate-difference: sup norm {0:.3e} below 1e-13")]
    DegenerateDifference(f64),
    #[error("all starts failed to converge")]
    AllStartsFailed,
    #[error(transparent)]
    Asymptotics(#[from] AsymptoticsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    UniqueUpToPhase,
    DistinctMinimaFound,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::UniqueUpToPhase => write!(f, "unique-up-to-phase"),
            Verdict::DistinctMinimaFound => write!(f, "distinct-minima-found"),
        }
    }
}

/// Multi-start experiment output.
#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub a: f64,
    pub omega: f64,
    pub n_starts: usize,
    /// Pairwise phase-modded L² distances (zero diagonal, symmetric).
    pub distances: Vec<Vec<f64>>,
    /// Optimal phases θ* for each pair.
    pub thetas: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    /// Indices of starts that failed to converge (excluded from the verdict).
    pub failed_starts: Vec<(usize, String)>,
    pub max_distance: f64,
    pub verdict: Verdict,
}

/// Difference-field decomposition onto span{w + x·∇w, ∂₁w, ∂₂w}.
#[derive(Debug, Clone, Copy)]
pub struct ModeDecomposition {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    /// Fraction of ‖η‖₂ outside the span (imaginary part included).
    pub residual_fraction: f64,
    /// Fraction of ‖η‖₂ carried by the imaginary part.
    pub imag_fraction: f64,
    /// Largest off-diagonal Gram entry relative to the diagonal scale.
    pub gram_offdiag_max: f64,
}

/// 2×3 Pohozaev matrix: first column tests the dilation mode, the right 2×2
/// block the translation modes.
#[derive(Debug, Clone, Copy)]
pub struct PohozaevMatrix {
    /// entries[l][0] = ∫ ∂h/∂y_l(y+y₀)(y·∇w²), entries[l][j] = ∫ ∂h/∂y_l(y+y₀) ∂w²/∂y_j
    pub entries: [[f64; 3]; 2],
}

impl PohozaevMatrix {
    pub fn right_block(&self) -> [[f64; 2]; 2] {
        [
            [self.entries[0][1], self.entries[0][2]],
            [self.entries[1][1], self.entries[1][2]],
        ]
    }

    pub fn right_block_det(&self) -> f64 {
        let m = self.right_block();
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

/// Optimal constant phase θ* = −arg⟨u₁, u₂⟩ and the resulting distance
/// ‖e^{iθ*}u₁ − u₂‖₂.
pub fn phase_distance(
    u1: &ComplexField,
    u2: &ComplexField,
) -> Result<(f64, f64), UniquenessError> {
    if u1.grid != u2.grid {
        return Err(UniquenessError::GridMismatch);
    }
    let ip = u1.inner(u2);
    let theta = -ip.arg();
    let m1 = u1.mass();
    let m2 = u2.mass();
    let dist_sq = (m1 + m2 - 2.0 * ip.norm()).max(0.0);
    Ok((theta.rem_euclid(std::f64::consts::TAU), dist_sq.sqrt()))
}

/// Run `n_starts` seeded minimizations and compare all pairs up to phase.
pub fn multistart_uniqueness(
    a: f64,
    omega: f64,
    trap_spec: &TrapSpec,
    grid: Grid2D,
    n_starts: usize,
    seed: u64,
    opts: MinimizeOpts,
) -> Result<UniquenessReport, UniquenessError> {
    // Per-start seeds derive from a counter, not from scheduling.
    let results: Vec<Result<GroundState, String>> = (0..n_starts)
        .into_par_iter()
        .map(|i| {
            let start_seed = gp2d::splitmix64(seed ^ ((i as u64 + 1).wrapping_mul(0x9E37_79B9)));
            gp2d::minimize(a, omega, trap_spec, grid, Init::Seeded(start_seed), opts)
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut failed = Vec::new();
    let mut states: Vec<Option<GroundState>> = Vec::with_capacity(n_starts);
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => states.push(Some(s)),
            Err(msg) => {
                failed.push((i, msg));
                states.push(None);
            }
        }
    }
    if states.iter().all(|s| s.is_none()) {
        return Err(UniquenessError::AllStartsFailed);
    }

    let mut distances = vec![vec![0.0; n_starts]; n_starts];
    let mut thetas = vec![vec![0.0; n_starts]; n_starts];
    let mut max_distance = 0.0_f64;
    for i in 0..n_starts {
        for j in (i + 1)..n_starts {
            if let (Some(si), Some(sj)) = (&states[i], &states[j]) {
                let (theta, dist) = phase_distance(&si.field, &sj.field)?;
                distances[i][j] = dist;
                distances[j][i] = dist;
                thetas[i][j] = theta;
                thetas[j][i] = (-theta).rem_euclid(std::f64::consts::TAU);
                max_distance = max_distance.max(dist);
            }
        }
    }
    let energies: Vec<f64> = states
        .iter()
        .map(|s| s.as_ref().map(|g| g.energy).unwrap_or(f64::NAN))
        .collect();
    let verdict = if max_distance < UNIQUENESS_THRESHOLD {
        Verdict::UniqueUpToPhase
    } else {
        Verdict::DistinctMinimaFound
    };
    Ok(UniquenessReport {
        a,
        omega,
        n_starts,
        distances,
        thetas,
        energies,
        failed_starts: failed,
        max_distance,
        verdict,
    })
}

/// Align two states in a common frame: the rescaling uses the second state's
/// α and peak for both, while each field gets its own optimal phase.
pub fn align_pair(
    s1: &GroundState,
    s2: &GroundState,
    conc: &ConcentrationData,
    profile: &RadialProfile,
) -> Result<(AlignedProfile, AlignedProfile), UniquenessError> {
    let alpha = alpha_of_a(s2.a, a_star(profile), conc.lambda, conc.p)
        .map_err(AsymptoticsError::from)?;
    let v1 = rescale_with(s1, alpha, s2.peak, profile)?;
    let v2 = rescale_with(s2, alpha, s2.peak, profile)?;
    Ok((v1, v2))
}

/// Normalize the difference per η = (v₂−v₁)/‖v₂−v₁‖_∞ and project its real
/// part onto the analytically discretized kernel modes.
pub fn decompose_difference(
    v1: &AlignedProfile,
    v2: &AlignedProfile,
    profile: &RadialProfile,
) -> Result<ModeDecomposition, UniquenessError> {
    if v1.field.grid != v2.field.grid {
        return Err(UniquenessError::GridMismatch);
    }
    let grid = v1.field.grid;
    let n = grid.n;
    let diff: Vec<num_complex::Complex64> = v2
        .field
        .values
        .iter()
        .zip(&v1.field.values)
        .map(|(b, a)| b - a)
        .collect();
    let sup = diff.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if sup < 1e-13 {
        return Err(UniquenessError::DegenerateDifference(sup));
    }
    let eta: Vec<num_complex::Complex64> = diff.iter().map(|v| v / sup).collect();

    // Basis from the radial profile: x·∇w = r w'(r), ∂_j w = w'(r) x_j / r.
    let mut basis = vec![vec![0.0_f64; n * n]; 3];
    for iy in 0..n {
        let y = grid.coord(iy);
        for ix in 0..n {
            let x = grid.coord(ix);
            let idx = iy * n + ix;
            let r = (x * x + y * y).sqrt();
            let w = profile.eval(r);
            let dw = profile.eval_dw(r);
            basis[0][idx] = w + r * dw;
            if r > 0.0 {
                basis[1][idx] = dw * x / r;
                basis[2][idx] = dw * y / r;
            }
        }
    }

    let dx2 = grid.dx() * grid.dx();
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * dx2
    };
    let diag = [
        dot(&basis[0], &basis[0]),
        dot(&basis[1], &basis[1]),
        dot(&basis[2], &basis[2]),
    ];
    let mut gram_offdiag_max = 0.0_f64;
    for i in 0..3 {
        for j in (i + 1)..3 {
            let g = dot(&basis[i], &basis[j]).abs();
            gram_offdiag_max = gram_offdiag_max.max(g / (diag[i] * diag[j]).sqrt());
        }
    }

    let eta_re: Vec<f64> = eta.iter().map(|v| v.re).collect();
    let b = [
        dot(&eta_re, &basis[0]) / diag[0],
        dot(&eta_re, &basis[1]) / diag[1],
        dot(&eta_re, &basis[2]) / diag[2],
    ];

    let mut outside = 0.0;
    let mut total = 0.0;
    let mut imag_sq = 0.0;
    for idx in 0..n * n {
        let projected = b[0] * basis[0][idx] + b[1] * basis[1][idx] + b[2] * basis[2][idx];
        let re_res = eta[idx].re - projected;
        outside += re_res * re_res + eta[idx].im * eta[idx].im;
        total += eta[idx].norm_sqr();
        imag_sq += eta[idx].im * eta[idx].im;
    }
    Ok(ModeDecomposition {
        b0: b[0],
        b1: b[1],
        b2: b[2],
        residual_fraction: (outside / total).sqrt(),
        imag_fraction: (imag_sq / total).sqrt(),
        gram_offdiag_max,
    })
}

fn pohozaev_axis(profile: &RadialProfile, cusp: bool, cusp_at: f64) -> AxisRule {
    // Deliberately different resolution and grading from the concentration
    // module so the cross-check compares two quadrature paths.
    if cusp {
        graded_axis(profile.r_max(), 3072, cusp_at, 3)
    } else {
        uniform_axis(profile.r_max(), 3072)
    }
}

/// The Pohozaev matrix by tensor quadrature: P_{l,0} pairs ∂h/∂y_l with the
/// dilation mode y·∇w², P_{l,j} with the translations ∂w²/∂y_j.
pub fn pohozaev_matrix(
    h: &HomogeneousFn,
    y0: [f64; 2],
    profile: &RadialProfile,
) -> PohozaevMatrix {
    let cusps = h.cusp_axes();
    let ax = pohozaev_axis(profile, cusps[0], -y0[0]);
    let ay = pohozaev_axis(profile, cusps[1], -y0[1]);
    let rows: Vec<[f64; 6]> = ay
        .nodes
        .par_iter()
        .zip(ay.weights.par_iter())
        .map(|(&y, &wy)| {
            let mut acc = [0.0; 6];
            for (&x, &wx) in ax.nodes.iter().zip(ax.weights.iter()) {
                let gh = h.grad(x + y0[0], y + y0[1]);
                let gw = grad_w_sq(profile, x, y);
                let dilation = x * gw[0] + y * gw[1];
                let w = wx;
                acc[0] += w * gh[0] * dilation;
                acc[1] += w * gh[0] * gw[0];
                acc[2] += w * gh[0] * gw[1];
                acc[3] += w * gh[1] * dilation;
                acc[4] += w * gh[1] * gw[0];
                acc[5] += w * gh[1] * gw[1];
            }
            for a in acc.iter_mut() {
                *a *= wy;
            }
            acc
        })
        .collect();
    let mut total = [0.0; 6];
    for row in rows {
        for k in 0..6 {
            total[k] += row[k];
        }
    }
    PohozaevMatrix {
        entries: [
            [total[0], total[1], total[2]],
            [total[3], total[4], total[5]],
        ],
    }
}
