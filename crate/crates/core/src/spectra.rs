//! Linearized operators 𝓛 = −Δ + 1 − w² and 𝓝 = −Δ + 1 − 3w² on the
//! pseudospectral grid, their low eigenpairs, and the coercivity constant of
//! 𝓛 on the w-orthogonal complement.

use crate::grid::{Grid2D, Spectral};
use crate::linalg::jacobi_eigh;
use crate::townes::RadialProfile;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("grid does not resolve the profile: dx = {0} above 0.25")]
    GridTooCoarse(f64),
    #[error("eigensolver-stall: {0}")]
    EigensolverStall(String),
    #[error("coercivity-violated: estimate {estimate:.3e} below -tol = {minus_tol:.3e}")]
    CoercivityViolated { estimate: f64, minus_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorTag {
    /// −Δ + 1 − w²
    L,
    /// −Δ + 1 − 3w²
    N,
}

impl std::fmt::Display for OperatorTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OperatorTag::L => write!(f, "L"),
            OperatorTag::N => write!(f, "N"),
        }
    }
}

/// Matrix-free application of −Δ + 1 − c·w² with a spectral Laplacian.
pub struct LinearizedOp {
    pub tag: OperatorTag,
    pub grid: Grid2D,
    coeff: f64,
    w_sq: Vec<f64>,
    /// Unit-norm reference modes on the grid: w, ∂₁w, ∂₂w.
    ref_w: Vec<f64>,
    ref_d1w: Vec<f64>,
    ref_d2w: Vec<f64>,
    sp: Spectral,
    buf: Vec<Complex64>,
}

pub fn build_operator(
    tag: OperatorTag,
    profile: &RadialProfile,
    grid: Grid2D,
) -> Result<LinearizedOp, SpectraError> {
    if grid.dx() > 0.25 {
        return Err(SpectraError::GridTooCoarse(grid.dx()));
    }
    let n = grid.n;
    let mut w_sq = Vec::with_capacity(n * n);
    let mut ref_w = Vec::with_capacity(n * n);
    let mut ref_d1w = Vec::with_capacity(n * n);
    let mut ref_d2w = Vec::with_capacity(n * n);
    for iy in 0..n {
        let y = grid.coord(iy);
        for ix in 0..n {
            let x = grid.coord(ix);
            let r = (x * x + y * y).sqrt();
            let w = profile.eval(r);
            w_sq.push(w * w);
            ref_w.push(w);
            if r > 0.0 {
                let dw = profile.eval_dw(r);
                ref_d1w.push(dw * x / r);
                ref_d2w.push(dw * y / r);
            } else {
                ref_d1w.push(0.0);
                ref_d2w.push(0.0);
            }
        }
    }
    for v in [&mut ref_w, &mut ref_d1w, &mut ref_d2w] {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(LinearizedOp {
        tag,
        grid,
        coeff: match tag {
            OperatorTag::L => 1.0,
            OperatorTag::N => 3.0,
        },
        w_sq,
        ref_w,
        ref_d1w,
        ref_d2w,
        sp: Spectral::new(grid),
        buf: vec![Complex64::default(); n * n],
    })
}

impl LinearizedOp {
    pub fn dim(&self) -> usize {
        self.grid.n * self.grid.n
    }

    /// out = (−Δ + 1 − c·w²) v
    pub fn apply(&mut self, v: &[f64], out: &mut [f64]) {
        for (b, &x) in self.buf.iter_mut().zip(v) {
            *b = Complex64::new(x, 0.0);
        }
        self.sp.fft2(&mut self.buf);
        self.sp
            .scale_modes(&mut self.buf, |kx, ky| Complex64::new(kx * kx + ky * ky, 0.0));
        self.sp.ifft2(&mut self.buf);
        for i in 0..v.len() {
            out[i] = self.buf[i].re + v[i] - self.coeff * self.w_sq[i] * v[i];
        }
    }

    /// Preconditioner (−Δ + 1)^{-1}, exact in Fourier space.
    fn precondition(&mut self, r: &[f64], out: &mut [f64]) {
        for (b, &x) in self.buf.iter_mut().zip(r) {
            *b = Complex64::new(x, 0.0);
        }
        self.sp.fft2(&mut self.buf);
        self.sp.scale_modes(&mut self.buf, |kx, ky| {
            Complex64::new(1.0 / (1.0 + kx * kx + ky * ky), 0.0)
        });
        self.sp.ifft2(&mut self.buf);
        for i in 0..r.len() {
            out[i] = self.buf[i].re;
        }
    }
}

/// Eigenpair report for one operator.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub tag: OperatorTag,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub overlap_w: Vec<f64>,
    pub overlap_d1w: Vec<f64>,
    pub overlap_d2w: Vec<f64>,
    /// Largest principal angle between the near-kernel eigenvectors and
    /// span{∂₁w, ∂₂w} (only meaningful for 𝓝 when two near-zero modes exist).
    pub kernel_subspace_angle: Option<f64>,
    pub rho_estimate: Option<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Locally optimal block preconditioned conjugate gradient for the smallest
/// eigenpairs of a symmetric operator, with optional orthogonality constraint.
struct Lobpcg<'a> {
    apply: Box<dyn FnMut(&[f64], &mut [f64]) + 'a>,
    precond: Box<dyn FnMut(&[f64], &mut [f64]) + 'a>,
    constraint: Option<Vec<f64>>,
    dim: usize,
}

impl<'a> Lobpcg<'a> {
    fn project(&self, v: &mut [f64]) {
        if let Some(c) = &self.constraint {
            let alpha = dot(c, v);
            for (x, &cc) in v.iter_mut().zip(c) {
                *x -= alpha * cc;
            }
        }
    }

    /// Orthonormalize the columns in place by symmetric (Loewdin-style)
    /// factorization of the Gram matrix, dropping near-dependent directions.
    fn orthonormalize(cols: &mut Vec<Vec<f64>>) {
        if cols.is_empty() {
            return;
        }
        let m = cols.len();
        let mut gram = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                gram[i * m + j] = dot(&cols[i], &cols[j]);
            }
        }
        let (vals, vecs) = jacobi_eigh(m, &mut gram);
        let vmax = vals.last().copied().unwrap_or(0.0).max(1e-300);
        let mut kept: Vec<Vec<f64>> = Vec::with_capacity(m);
        let dim = cols[0].len();
        for j in 0..m {
            if vals[j] <= 1e-12 * vmax {
                continue;
            }
            let scale = 1.0 / vals[j].sqrt();
            let mut col = vec![0.0; dim];
            for (i, src) in cols.iter().enumerate() {
                let c = vecs[i * m + j] * scale;
                if c != 0.0 {
                    for (dst, &x) in col.iter_mut().zip(src) {
                        *dst += c * x;
                    }
                }
            }
            kept.push(col);
        }
        *cols = kept;
    }

    fn solve(
        &mut self,
        k: usize,
        tol: f64,
        max_iter: usize,
        seed: u64,
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>), SpectraError> {
        let dim = self.dim;
        let block = (k + 2).min(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<Vec<f64>> = (0..block)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        for col in x.iter_mut() {
            self.project(col);
        }
        Self::orthonormalize(&mut x);

        let mut ax: Vec<Vec<f64>> = x
            .iter()
            .map(|col| {
                let mut out = vec![0.0; dim];
                (self.apply)(col, &mut out);
                out
            })
            .collect();
        let mut p: Vec<Vec<f64>> = Vec::new();
        let mut ap: Vec<Vec<f64>> = Vec::new();

        for _it in 0..max_iter {
            // Rayleigh-Ritz within the current X block.
            let m = x.len();
            let mut h = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    h[i * m + j] = dot(&x[i], &ax[j]);
                }
            }
            let (vals, vecs) = jacobi_eigh(m, &mut h);
            let rotate = |cols: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
                (0..m)
                    .map(|j| {
                        let mut out = vec![0.0; dim];
                        for (i, src) in cols.iter().enumerate() {
                            let c = vecs[i * m + j];
                            for (dst, &v) in out.iter_mut().zip(src) {
                                *dst += c * v;
                            }
                        }
                        out
                    })
                    .collect()
            };
            x = rotate(&x);
            ax = rotate(&ax);

            // Residuals for the k requested pairs.
            let mut res: Vec<Vec<f64>> = Vec::with_capacity(k.min(m));
            let mut worst = 0.0_f64;
            for j in 0..k.min(m) {
                let mut r: Vec<f64> = ax[j]
                    .iter()
                    .zip(&x[j])
                    .map(|(a, v)| a - vals[j] * v)
                    .collect();
                let rn = norm(&r);
                worst = worst.max(rn / (vals[j].abs() + 1.0));
                self.project(&mut r);
                res.push(r);
            }
            if worst < tol {
                let eigvals = vals[..k.min(m)].to_vec();
                let eigvecs = x[..k.min(m)].to_vec();
                return Ok((eigvals, eigvecs));
            }

            // Preconditioned residuals.
            let mut w: Vec<Vec<f64>> = res
                .iter()
                .map(|r| {
                    let mut out = vec![0.0; dim];
                    (self.precond)(r, &mut out);
                    self.project(&mut out);
                    out
                })
                .collect();
            // Orthogonalize W against X (and P) to keep the basis tame.
            for col in w.iter_mut() {
                for xc in x.iter().chain(p.iter()) {
                    let alpha = dot(xc, col);
                    for (dst, &v) in col.iter_mut().zip(xc) {
                        *dst -= alpha * v;
                    }
                }
            }
            Self::orthonormalize(&mut w);
            let aw: Vec<Vec<f64>> = w
                .iter()
                .map(|col| {
                    let mut out = vec![0.0; dim];
                    (self.apply)(col, &mut out);
                    out
                })
                .collect();

            // Rayleigh-Ritz on the subspace [X, W, P].
            let mut basis: Vec<&Vec<f64>> = Vec::new();
            let mut abasis: Vec<&Vec<f64>> = Vec::new();
            for (b, a) in x.iter().zip(ax.iter()) {
                basis.push(b);
                abasis.push(a);
            }
            for (b, a) in w.iter().zip(aw.iter()) {
                basis.push(b);
                abasis.push(a);
            }
            for (b, a) in p.iter().zip(ap.iter()) {
                basis.push(b);
                abasis.push(a);
            }
            let mm = basis.len();
            let mut gram = vec![0.0; mm * mm];
            let mut hmat = vec![0.0; mm * mm];
            for i in 0..mm {
                for j in 0..mm {
                    gram[i * mm + j] = dot(basis[i], basis[j]);
                    hmat[i * mm + j] = dot(basis[i], abasis[j]);
                }
            }
            // Whiten with the Gram eigendecomposition, dropping tiny modes.
            let (gvals, gvecs) = jacobi_eigh(mm, &mut gram);
            let gmax = gvals.last().copied().unwrap_or(0.0).max(1e-300);
            let kept: Vec<usize> = (0..mm).filter(|&j| gvals[j] > 1e-12 * gmax).collect();
            let nk = kept.len();
            // F = U D^{-1/2} restricted to kept columns.
            let mut f = vec![0.0; mm * nk];
            for (jc, &j) in kept.iter().enumerate() {
                let s = 1.0 / gvals[j].sqrt();
                for i in 0..mm {
                    f[i * nk + jc] = gvecs[i * mm + j] * s;
                }
            }
            // H~ = Fᵀ H F
            let mut ht = vec![0.0; nk * nk];
            for icol in 0..nk {
                for jcol in 0..nk {
                    let mut acc = 0.0;
                    for r in 0..mm {
                        let mut hr = 0.0;
                        for c in 0..mm {
                            hr += hmat[r * mm + c] * f[c * nk + jcol];
                        }
                        acc += f[r * nk + icol] * hr;
                    }
                    ht[icol * nk + jcol] = acc;
                }
            }
            let (tvals, tvecs) = jacobi_eigh(nk, &mut ht);
            let take = block.min(nk);
            // C = F Y for the `take` smallest Ritz pairs.
            let mut cmat = vec![0.0; mm * take];
            for jcol in 0..take {
                for i in 0..mm {
                    let mut acc = 0.0;
                    for c in 0..nk {
                        acc += f[i * nk + c] * tvecs[c * nk + jcol];
                    }
                    cmat[i * take + jcol] = acc;
                }
            }
            let combine = |rows: &[&Vec<f64>], col: usize, skip_x: bool| -> Vec<f64> {
                let mut out = vec![0.0; dim];
                for (i, src) in rows.iter().enumerate() {
                    if skip_x && i < x.len() {
                        continue;
                    }
                    let c = cmat[i * take + col];
                    if c != 0.0 {
                        for (dst, &v) in out.iter_mut().zip(src.iter()) {
                            *dst += c * v;
                        }
                    }
                }
                out
            };
            let mut new_x = Vec::with_capacity(take);
            let mut new_ax = Vec::with_capacity(take);
            let mut new_p = Vec::with_capacity(take);
            let mut new_ap = Vec::with_capacity(take);
            for j in 0..take {
                new_x.push(combine(&basis, j, false));
                new_ax.push(combine(&abasis, j, false));
                let pj = combine(&basis, j, true);
                let apj = combine(&abasis, j, true);
                let pn = norm(&pj);
                if pn > 1e-12 {
                    new_p.push(pj.iter().map(|v| v / pn).collect());
                    new_ap.push(apj.iter().map(|v| v / pn).collect());
                }
            }
            let _ = tvals;
            x = new_x;
            ax = new_ax;
            p = new_p;
            ap = new_ap;
        }
        Err(SpectraError::EigensolverStall(format!(
            "no convergence within {max_iter} block iterations"
        )))
    }
}

/// The k smallest eigenpairs with overlap diagnostics.
pub fn low_spectrum(
    op: &mut LinearizedOp,
    k: usize,
    tol: f64,
) -> Result<SpectrumReport, SpectraError> {
    let dim = op.dim();
    let tag = op.tag;
    let ref_w = op.ref_w.clone();
    let ref_d1w = op.ref_d1w.clone();
    let ref_d2w = op.ref_d2w.clone();

    // The borrow of `op` is split between apply and precondition through a
    // small queue: both run on the same exclusive reference.
    let cell = std::cell::RefCell::new(op);
    let (vals, vecs) = {
        let apply = |v: &[f64], out: &mut [f64]| cell.borrow_mut().apply(v, out);
        let precond = |v: &[f64], out: &mut [f64]| cell.borrow_mut().precondition(v, out);
        let mut solver = Lobpcg {
            apply: Box::new(apply),
            precond: Box::new(precond),
            constraint: None,
            dim,
        };
        solver.solve(k, tol, 400, 0x5eed)?
    };
    let op = cell.into_inner();

    // Verify the residual contract on the returned pairs.
    let mut residuals = Vec::with_capacity(vals.len());
    let mut out = vec![0.0; dim];
    for (v, &lam) in vecs.iter().zip(&vals) {
        op.apply(v, &mut out);
        let r: f64 = out
            .iter()
            .zip(v)
            .map(|(a, x)| (a - lam * x) * (a - lam * x))
            .sum::<f64>()
            .sqrt();
        if r > tol * (lam.abs() + 1.0) * 10.0 {
            return Err(SpectraError::EigensolverStall(format!(
                "returned pair violates the residual contract: {r:.3e}"
            )));
        }
        residuals.push(r);
    }

    let overlap = |v: &[f64], r: &[f64]| dot(v, r).abs() / norm(v);
    let overlap_w: Vec<f64> = vecs.iter().map(|v| overlap(v, &ref_w)).collect();
    let overlap_d1w: Vec<f64> = vecs.iter().map(|v| overlap(v, &ref_d1w)).collect();
    let overlap_d2w: Vec<f64> = vecs.iter().map(|v| overlap(v, &ref_d2w)).collect();

    let kernel_subspace_angle = if tag == OperatorTag::N {
        let near_zero: Vec<&Vec<f64>> = vecs
            .iter()
            .zip(&vals)
            .filter(|(_, &l)| l.abs() < 1e-5)
            .map(|(v, _)| v)
            .collect();
        if near_zero.len() == 2 {
            Some(subspace_angle(
                [near_zero[0], near_zero[1]],
                [&ref_d1w, &ref_d2w],
            ))
        } else {
            None
        }
    } else {
        None
    };

    Ok(SpectrumReport {
        tag,
        eigenvalues: vals,
        residuals,
        overlap_w,
        overlap_d1w,
        overlap_d2w,
        kernel_subspace_angle,
        rho_estimate: None,
        eigenvectors: vecs,
    })
}

/// Largest principal angle between two 2-D subspaces given by spanning pairs.
pub fn subspace_angle(a: [&Vec<f64>; 2], b: [&Vec<f64>; 2]) -> f64 {
    let ortho_pair = |p: [&Vec<f64>; 2]| -> (Vec<f64>, Vec<f64>) {
        let mut u = p[0].clone();
        let nu = norm(&u);
        u.iter_mut().for_each(|x| *x /= nu);
        let mut v = p[1].clone();
        let proj = dot(&u, &v);
        v.iter_mut().zip(&u).for_each(|(x, &uu)| *x -= proj * uu);
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        (u, v)
    };
    let (a0, a1) = ortho_pair(a);
    let (b0, b1) = ortho_pair(b);
    // Singular values of the 2×2 cross-Gram are the cosines.
    let m = [
        dot(&a0, &b0),
        dot(&a0, &b1),
        dot(&a1, &b0),
        dot(&a1, &b1),
    ];
    let mut mtm = [
        m[0] * m[0] + m[2] * m[2],
        m[0] * m[1] + m[2] * m[3],
        m[0] * m[1] + m[2] * m[3],
        m[1] * m[1] + m[3] * m[3],
    ];
    let (vals, _) = jacobi_eigh(2, &mut mtm);
    let cos_min = vals[0].max(0.0).sqrt().clamp(0.0, 1.0);
    cos_min.acos()
}

/// Coercivity constant: the minimum of ⟨𝓛v, v⟩ / ‖v‖²_{H¹} over ⟨v, w⟩ = 0,
/// computed as the smallest eigenvalue of B^{-1/2} 𝓛 B^{-1/2} (B = −Δ + 1)
/// restricted to the complement of B^{-1/2} w.
pub fn coercivity_rho(
    profile: &RadialProfile,
    grid: Grid2D,
    tol: f64,
) -> Result<f64, SpectraError> {
    let mut op = build_operator(OperatorTag::L, profile, grid)?;
    let dim = op.dim();

    let half_inv_b = |op: &mut LinearizedOp, v: &[f64], out: &mut [f64]| {
        for (b, &x) in op.buf.iter_mut().zip(v) {
            *b = Complex64::new(x, 0.0);
        }
        op.sp.fft2(&mut op.buf);
        op.sp.scale_modes(&mut op.buf, |kx, ky| {
            Complex64::new(1.0 / (1.0 + kx * kx + ky * ky).sqrt(), 0.0)
        });
        op.sp.ifft2(&mut op.buf);
        for i in 0..v.len() {
            out[i] = op.buf[i].re;
        }
    };

    // Constraint g = B^{-1/2} w, unit norm.
    let w_raw = op.ref_w.clone();
    let mut g = vec![0.0; dim];
    half_inv_b(&mut op, &w_raw, &mut g);
    let gn = norm(&g);
    g.iter_mut().for_each(|x| *x /= gn);

    let cell = std::cell::RefCell::new(op);
    let (vals, _vecs) = {
        let apply = |v: &[f64], out: &mut [f64]| {
            let mut op = cell.borrow_mut();
            let mut t1 = vec![0.0; v.len()];
            half_inv_b(&mut op, v, &mut t1);
            let mut t2 = vec![0.0; v.len()];
            op.apply(&t1, &mut t2);
            half_inv_b(&mut op, &t2, out);
        };
        let precond = |v: &[f64], out: &mut [f64]| out.copy_from_slice(v);
        let mut solver = Lobpcg {
            apply: Box::new(apply),
            precond: Box::new(precond),
            constraint: Some(g),
            dim,
        };
        solver.solve(1, tol.max(1e-9), 600, 0x10b0)?
    };
    let rho = vals[0];
    if rho < -tol {
        return Err(SpectraError::CoercivityViolated {
            estimate: rho,
            minus_tol: -tol,
        });
    }
    Ok(rho)
}
