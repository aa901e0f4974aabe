//! Small dense linear-algebra helpers: a cyclic Jacobi symmetric eigensolver and a
//! rank routine used for controllability tests.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Returns `true` when `m` is square and symmetric to `tol` (scaled by the largest entry).
pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues of a symmetric matrix in ascending order.
///
/// Cyclic Jacobi: each sweep annihilates every off-diagonal pair with a plane
/// rotation; iteration stops once the off-diagonal Frobenius norm is below
/// `1e-12` (relative to `max(1, ‖M‖_F)`).
pub fn eig_sym(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !is_symmetric(m, SYMMETRY_TOL) {
        return Err(Error::invalid("eig_sym requires a square symmetric matrix"));
    }
    let n = m.nrows();
    // symmetrize to remove representational noise
    let mut a = (m + m.transpose()) * 0.5;
    let threshold = OFF_DIAGONAL_TOL * frobenius(&a).max(1.0);

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }
    if off_diagonal_norm(&a) > threshold {
        return Err(Error::NumericalFailure {
            message: "Jacobi sweeps did not converge".into(),
            bracket: (0.0, off_diagonal_norm(&a)),
        });
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(ev)
}

/// Numerical rank by Gaussian elimination with full pivoting. Entries are
/// compared against `tol` after scaling by the largest absolute entry.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return 0;
    }
    a /= scale;
    let mut r = 0;
    let mut row_used = 0;
    let mut col_perm: Vec<usize> = (0..cols).collect();
    while row_used < rows && r < cols {
        // full pivot on the remaining block
        let mut best = (row_used, r, 0.0_f64);
        for i in row_used..rows {
            for (jj, &j) in col_perm.iter().enumerate().skip(r) {
                let v = a[(i, j)].abs();
                if v > best.2 {
                    best = (i, jj, v);
                }
            }
        }
        if best.2 <= tol {
            break;
        }
        a.swap_rows(row_used, best.0);
        col_perm.swap(r, best.1);
        let pc = col_perm[r];
        let pivot = a[(row_used, pc)];
        for i in (row_used + 1)..rows {
            let factor = a[(i, pc)] / pivot;
            if factor != 0.0 {
                for &j in &col_perm[r..] {
                    a[(i, j)] -= factor * a[(row_used, j)];
                }
            }
        }
        row_used += 1;
        r += 1;
    }
    r
}

/// Controllability matrix `[B, AB, …, Aⁿ⁻¹B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut c = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        c.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * &block;
    }
    c
}

pub fn is_controllable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    rank(&controllability_matrix(a, b), 1e-10) == a.nrows()
}

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`.
pub fn cholesky(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::linalg::Cholesky::new(m.clone()).map(|c| c.l())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form_2x2(a: f64, b: f64, d: f64) -> (f64, f64) {
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mean - rad, mean + rad)
    }

    #[test]
    fn eig_sym_examples() {
        let ev = eig_sym(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(ev, vec![1.0, 1.0]);
        let ev = eig_sym(&DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -2.0])).unwrap();
        assert_eq!(ev, vec![-2.0, 3.0]);
        let ev = eig_sym(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eig_sym_rejects_nonsymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(eig_sym(&m), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn eig_sym_matches_closed_form() {
        for &(a, b, d) in &[(1.0, 0.3, -2.0), (5.0, -4.0, 1e-3), (1e3, 1.0, 1e3), (0.0, 1.0, 0.0)] {
            let ev = eig_sym(&DMatrix::from_row_slice(2, 2, &[a, b, b, d])).unwrap();
            let (lo, hi) = closed_form_2x2(a, b, d);
            let scale = 1.0_f64.max(hi.abs());
            assert!((ev[0] - lo).abs() <= 1e-12 * scale, "{ev:?} vs {lo}");
            assert!((ev[1] - hi).abs() <= 1e-12 * scale, "{ev:?} vs {hi}");
        }
    }

    #[test]
    fn eig_sym_trace_and_det_4x4() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[4.0, 1.0, -2.0, 2.0, 1.0, 2.0, 0.0, 1.0, -2.0, 0.0, 3.0, -2.0, 2.0, 1.0, -2.0, -1.0],
        );
        let ev = eig_sym(&m).unwrap();
        let trace: f64 = ev.iter().sum();
        let det: f64 = ev.iter().product();
        assert!((trace - m.trace()).abs() < 1e-10);
        assert!((det - m.clone().determinant()).abs() < 1e-9);
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn double_integrator_is_controllable() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(is_controllable(&a, &b));
        assert!(!is_controllable(&a, &DMatrix::zeros(2, 1)));
        let b1 = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(!is_controllable(&a, &b1));
    }
}
