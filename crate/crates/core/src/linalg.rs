//! Small dense linear algebra: cyclic Jacobi eigendecomposition for the
//! Rayleigh-Ritz systems and a pivoted Gaussian solver for tiny fits.

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// `a` is an n×n row-major symmetric matrix (destroyed). Returns eigenvalues
/// in ascending order and eigenvectors as a row-major matrix whose column j
/// is the eigenvector for eigenvalue j.
pub fn jacobi_eigh(n: usize, a: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() < 1e-15 * (1.0 + frobenius(n, a)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (jnew, &jold) in order.iter().enumerate() {
        for i in 0..n {
            vecs[i * n + jnew] = v[i * n + jold];
        }
    }
    (vals, vecs)
}

fn frobenius(n: usize, a: &[f64]) -> f64 {
    a.iter().take(n * n).map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve `a x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is n×n row-major; on return `b` holds the solution.
pub fn solve_dense(n: usize, a: &mut [f64], b: &mut [f64]) -> Result<(), SingularMatrix> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    for col in 0..n {
        let mut piv = col;
        for row in (col + 1)..n {
            if a[row * n + col].abs() > a[piv * n + col].abs() {
                piv = row;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return Err(SingularMatrix);
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in (col + 1)..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in (col + 1)..n {
            s -= a[col * n + k] * b[k];
        }
        b[col] = s / a[col * n + col];
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularMatrix;

impl std::fmt::Display for SingularMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "singular matrix")
    }
}

impl std::error::Error for SingularMatrix {}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // diag(1,2,3) conjugated by a rotation in the (0,2) plane.
        let c = (0.3_f64).cos();
        let s = (0.3_f64).sin();
        // R D R^T with D = diag(1,2,3).
        let d = [1.0, 2.0, 3.0];
        let r = [c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c];
        let mut a = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    a[i * 3 + j] += r[i * 3 + k] * d[k] * r[j * 3 + k];
                }
            }
        }
        let (vals, vecs) = jacobi_eigh(3, &mut a);
        for (got, want) in vals.iter().zip(&d) {
            assert!((got - want).abs() < 1e-12);
        }
        // Columns orthonormal.
        for j in 0..3 {
            let norm: f64 = (0..3).map(|i| vecs[i * 3 + j] * vecs[i * 3 + j]).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_solves_small_system() {
        let mut a = [2.0, 1.0, -1.0, -3.0, -1.0, 2.0, -2.0, 1.0, 2.0];
        let mut b = [8.0, -11.0, -3.0];
        solve_dense(3, &mut a, &mut b).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12);
        assert!((b[1] - 3.0).abs() < 1e-12);
        assert!((b[2] - -1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (m, b) = linear_fit(&xs, &ys);
        assert!((m - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    }
}
