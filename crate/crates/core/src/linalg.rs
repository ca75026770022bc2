//! Small dense linear algebra on row-major `n × n` slices.
//!
//! Everything here is sized for per-node work (n is the domain dimension), so
//! routines operate in place on caller-provided buffers and never allocate on
//! the hot path.

/// Off-diagonal Frobenius norm target for the Jacobi sweeps, relative to
/// `max(1, ‖A‖_F)`.
pub const JACOBI_TOL: f64 = 1e-13;

const JACOBI_MAX_SWEEPS: usize = 64;

/// Eigenvalues of the symmetric matrix `a` by cyclic Jacobi rotations.
///
/// `a` is overwritten with the (numerically) diagonalized matrix and the
/// eigenvalues are written to `eig` in no particular order. Returns the
/// number of sweeps performed.
pub fn sym_eigenvalues_jacobi(a: &mut [f64], n: usize, eig: &mut [f64]) -> usize {
    debug_assert_eq!(a.len(), n * n);
    debug_assert!(eig.len() >= n);
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = JACOBI_TOL * norm.max(1.0);
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(a, n);
        if off <= target {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // tan of the rotation angle, smaller root for stability
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
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
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }
    for i in 0..n {
        eig[i] = a[i * n + i];
    }
    sweeps
}

pub fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Inverse of `a` into `out`; returns the determinant, or `None` when the
/// matrix is singular to working precision.
///
/// Uses the adjugate for `n <= 3` and Gauss-Jordan elimination with partial
/// pivoting otherwise. `work` must hold at least `n * n` entries when `n > 3`.
pub fn invert(a: &[f64], n: usize, out: &mut [f64], work: &mut [f64]) -> Option<f64> {
    match n {
        1 => {
            let det = a[0];
            if det == 0.0 {
                return None;
            }
            out[0] = 1.0 / det;
            Some(det)
        }
        2 => {
            let det = a[0] * a[3] - a[1] * a[2];
            if det == 0.0 {
                return None;
            }
            let inv = 1.0 / det;
            out[0] = a[3] * inv;
            out[1] = -a[1] * inv;
            out[2] = -a[2] * inv;
            out[3] = a[0] * inv;
            Some(det)
        }
        3 => {
            let c00 = a[4] * a[8] - a[5] * a[7];
            let c01 = a[5] * a[6] - a[3] * a[8];
            let c02 = a[3] * a[7] - a[4] * a[6];
            let det = a[0] * c00 + a[1] * c01 + a[2] * c02;
            if det == 0.0 {
                return None;
            }
            let inv = 1.0 / det;
            out[0] = c00 * inv;
            out[1] = (a[2] * a[7] - a[1] * a[8]) * inv;
            out[2] = (a[1] * a[5] - a[2] * a[4]) * inv;
            out[3] = c01 * inv;
            out[4] = (a[0] * a[8] - a[2] * a[6]) * inv;
            out[5] = (a[2] * a[3] - a[0] * a[5]) * inv;
            out[6] = c02 * inv;
            out[7] = (a[1] * a[6] - a[0] * a[7]) * inv;
            out[8] = (a[0] * a[4] - a[1] * a[3]) * inv;
            Some(det)
        }
        _ => gauss_jordan_inverse(a, n, out, work),
    }
}

fn gauss_jordan_inverse(a: &[f64], n: usize, out: &mut [f64], work: &mut [f64]) -> Option<f64> {
    let w = &mut work[..n * n];
    w.copy_from_slice(a);
    out[..n * n].fill(0.0);
    for i in 0..n {
        out[i * n + i] = 1.0;
    }
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| w[r * n + col].abs().total_cmp(&w[s * n + col].abs()))
            .unwrap();
        let pv = w[pivot * n + col];
        if pv == 0.0 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                w.swap(pivot * n + k, col * n + k);
                out.swap(pivot * n + k, col * n + k);
            }
            det = -det;
        }
        det *= pv;
        let inv = 1.0 / pv;
        for k in 0..n {
            w[col * n + k] *= inv;
            out[col * n + k] *= inv;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = w[r * n + col];
            if factor == 0.0 {
                continue;
            }
            for k in 0..n {
                w[r * n + k] -= factor * w[col * n + k];
                out[r * n + k] -= factor * out[col * n + k];
            }
        }
    }
    Some(det)
}

/// Determinant by LU with partial pivoting (allocates).
pub fn determinant(a: &[f64], n: usize) -> f64 {
    let mut w = a.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| w[r * n + col].abs().total_cmp(&w[s * n + col].abs()))
            .unwrap();
        if w[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                w.swap(pivot * n + k, col * n + k);
            }
            det = -det;
        }
        let pv = w[col * n + col];
        det *= pv;
        for r in (col + 1)..n {
            let factor = w[r * n + col] / pv;
            for k in col..n {
                w[r * n + k] -= factor * w[col * n + k];
            }
        }
    }
    det
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` if a pivot falls below `1e-14 * max|a|`.
pub fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut w = a.to_vec();
    let mut x = b.to_vec();
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| w[r * n + col].abs().total_cmp(&w[s * n + col].abs()))
            .unwrap();
        if w[pivot * n + col].abs() <= 1e-14 * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                w.swap(pivot * n + k, col * n + k);
            }
            x.swap(pivot, col);
        }
        let pv = w[col * n + col];
        for r in (col + 1)..n {
            let factor = w[r * n + col] / pv;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                w[r * n + k] -= factor * w[col * n + k];
            }
            x[r] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in (col + 1)..n {
            s -= w[col * n + k] * x[k];
        }
        x[col] = s / w[col * n + col];
    }
    Some(x)
}

/// Generalized cross product of `n - 1` row vectors of length `n`: a vector
/// orthogonal to all rows, zero when the rows are linearly dependent.
pub fn null_vector(rows: &[&[f64]], n: usize) -> Vec<f64> {
    debug_assert_eq!(rows.len() + 1, n);
    let mut minor = vec![0.0; (n - 1) * (n - 1)];
    (0..n)
        .map(|skip| {
            for (r, row) in rows.iter().enumerate() {
                let mut c = 0;
                for (k, &v) in row.iter().enumerate() {
                    if k != skip {
                        minor[r * (n - 1) + c] = v;
                        c += 1;
                    }
                }
            }
            let sign = if skip % 2 == 0 { 1.0 } else { -1.0 };
            sign * determinant(&minor, n - 1)
        })
        .collect()
}

/// `J Jᵀ` for a row-major `n × m` matrix `j`, written to the `n × n` buffer `out`.
#[inline]
pub fn gram(j: &[f64], n: usize, m: usize, out: &mut [f64]) {
    for a in 0..n {
        for b in a..n {
            let mut s = 0.0;
            for k in 0..m {
                s += j[a * m + k] * j[b * m + k];
            }
            out[a * n + b] = s;
            out[b * n + a] = s;
        }
    }
}

/// Euclidean norm.
#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c[i * n + j] += a[i * n + k] * b[k * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn jacobi_diagonalizes_known_matrix() {
        // eigenvalues 1, 2, 4
        let mut a = vec![2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        let mut eig = [0.0; 3];
        sym_eigenvalues_jacobi(&mut a, 3, &mut eig);
        eig.sort_by(f64::total_cmp);
        let s2 = 2f64.sqrt();
        let want = [2.0 - s2, 2.0, 2.0 + s2];
        for (e, w) in eig.iter().zip(want) {
            assert!((e - w).abs() < 1e-13, "{e} vs {w}");
        }
    }

    #[test]
    fn inverse_matches_identity_for_all_paths() {
        for n in 1..=5 {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] = if i == j { 3.0 + i as f64 } else { 0.3 / (1.0 + (i + 2 * j) as f64) };
                }
            }
            let mut inv = vec![0.0; n * n];
            let mut work = vec![0.0; n * n];
            let det = invert(&a, n, &mut inv, &mut work).unwrap();
            assert!((det - determinant(&a, n)).abs() < 1e-12 * det.abs());
            let prod = matmul(&a, &inv, n);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((prod[i * n + j] - want).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let a = [1.0, 2.0, 2.0, 4.0];
        let mut out = [0.0; 4];
        assert!(invert(&a, 2, &mut out, &mut []).is_none());
    }

    #[test]
    fn null_vector_is_orthogonal() {
        let r0 = [1.0, 2.0, 0.5];
        let r1 = [0.0, -1.0, 3.0];
        let v = null_vector(&[&r0, &r1], 3);
        let d0: f64 = r0.iter().zip(&v).map(|(a, b)| a * b).sum();
        let d1: f64 = r1.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!(d0.abs() < 1e-14 && d1.abs() < 1e-14);
        assert!(norm(&v) > 1.0);
    }

    #[test]
    fn solve_recovers_solution() {
        let a = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|k| a[i * 3 + k] * x[k]).sum()).collect();
        let got = solve(&a, &b, 3).unwrap();
        for (g, w) in got.iter().zip(x) {
            assert!((g - w).abs() < 1e-14);
        }
    }
}
