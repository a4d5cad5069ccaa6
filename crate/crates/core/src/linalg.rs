//! Weighted norms, spectral estimation, positive-semidefinite certification
//! and a small pivoted solver for the reference systems.

use crate::error::{Error, Result};
use crate::float;
use crate::matrix::{DenseMatrix, Matrix};
use crate::rng::SeededRng;
use crate::vector::Vector;

/// Quadratic form `xᵀGx`. The value may be negative for indefinite `G`;
/// callers that need a norm certify positive semidefiniteness separately.
pub fn weighted_norm_sq(x: &Vector, g: &Matrix) -> Result<f64> {
    if g.cols() != x.len() || g.rows() != x.len() {
        return Err(Error::DimMismatch {
            what: "weighted_norm_sq",
            expected: x.len(),
            got: g.cols(),
        });
    }
    Ok(x.dot(&g.matvec(x)))
}

/// Squared norm under a positive diagonal metric.
pub fn diag_norm_sq(x: &Vector, diag: &Vector) -> f64 {
    debug_assert_eq!(x.len(), diag.len());
    x.iter()
        .zip(diag.iter())
        .map(|(v, d)| d * v * v)
        .sum()
}

/// Squared norm under the inverse of a positive diagonal metric.
pub fn diag_inv_norm_sq(x: &Vector, diag: &Vector) -> f64 {
    debug_assert_eq!(x.len(), diag.len());
    x.iter()
        .zip(diag.iter())
        .map(|(v, d)| v * v / d)
        .sum()
}

#[derive(Clone, Copy, Debug)]
pub struct SpectralEstimate {
    /// Estimated largest singular value of the input.
    pub value: f64,
    /// False when the iteration hit `max_it` before the tolerance.
    pub converged: bool,
}

/// Largest-singular-value estimate by power iteration on `MᵀM`.
/// Deterministic for a given seed; on stagnation the current estimate is
/// returned with `converged = false`.
pub fn spectral_norm_est(
    m: &Matrix,
    tol: f64,
    max_it: usize,
    rng: &mut SeededRng,
) -> Result<SpectralEstimate> {
    if tol <= 0.0 {
        return Err(Error::InvalidParam(alloc::format!(
            "spectral tolerance must be positive, got {tol}"
        )));
    }
    let n = m.cols();
    if n == 0 || m.rows() == 0 {
        return Ok(SpectralEstimate {
            value: 0.0,
            converged: true,
        });
    }
    let mut v = Vector::zeros(n);
    for i in 0..n {
        v[i] = rng.range_f64(-1.0, 1.0);
    }
    let nv = v.norm();
    if nv == 0.0 {
        v[0] = 1.0;
    } else {
        v.scale(1.0 / nv);
    }
    let mut sigma = 0.0;
    for it in 0..max_it {
        let w = m.matvec(&v); // ‖w‖ = sqrt(vᵀMᵀMv) for unit v
        let new_sigma = w.norm();
        if new_sigma == 0.0 {
            return Ok(SpectralEstimate {
                value: 0.0,
                converged: true,
            });
        }
        let mut u = m.matvec_t(&w);
        let nu = u.norm();
        if nu == 0.0 {
            return Ok(SpectralEstimate {
                value: new_sigma,
                converged: true,
            });
        }
        u.scale(1.0 / nu);
        let done = it > 0 && float::abs(new_sigma - sigma) <= tol * new_sigma;
        sigma = new_sigma;
        v = u;
        if done {
            return Ok(SpectralEstimate {
                value: sigma,
                converged: true,
            });
        }
    }
    Ok(SpectralEstimate {
        value: sigma,
        converged: false,
    })
}

/// True iff `S + shift·I` admits a Cholesky factorization, i.e. the smallest
/// eigenvalue of `S` is at least `-shift` up to a small internal diagonal
/// slack of `1e-10·(1 + |trace|/n)`.
pub fn psd_certify(s: &DenseMatrix, shift: f64) -> Result<bool> {
    if s.rows() != s.cols() {
        return Err(Error::Asymmetric("psd_certify input"));
    }
    if !s.is_symmetric(1e-10) {
        return Err(Error::Asymmetric("psd_certify input"));
    }
    if shift < 0.0 {
        return Err(Error::InvalidParam(alloc::format!(
            "psd shift must be nonnegative, got {shift}"
        )));
    }
    let n = s.rows();
    if n == 0 {
        return Ok(true);
    }
    let trace: f64 = (0..n).map(|i| s.get(i, i)).sum();
    let slack = 1e-10 * (1.0 + float::abs(trace) / n as f64);
    let mut a = s.clone();
    for i in 0..n {
        a.add_to(i, i, shift + slack);
    }
    Ok(cholesky_in_place(&mut a))
}

/// Plain (unpivoted) Cholesky; returns false on a nonpositive pivot.
fn cholesky_in_place(a: &mut DenseMatrix) -> bool {
    let n = a.rows();
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            let l = a.get(j, k);
            d -= l * l;
        }
        if d <= 0.0 {
            return false;
        }
        let dj = float::sqrt(d);
        a.set(j, j, dj);
        for i in (j + 1)..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= a.get(i, k) * a.get(j, k);
            }
            a.set(i, j, v / dj);
        }
    }
    true
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn solve_lu(a: &DenseMatrix, b: &Vector) -> Result<Vector> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimMismatch {
            what: "solve_lu matrix",
            expected: n,
            got: a.cols(),
        });
    }
    if b.len() != n {
        return Err(Error::DimMismatch {
            what: "solve_lu rhs",
            expected: n,
            got: b.len(),
        });
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs().max(1e-300);
    for col in 0..n {
        // pivot
        let mut p = col;
        let mut best = float::abs(lu.get(col, col));
        for r in (col + 1)..n {
            let v = float::abs(lu.get(r, col));
            if v > best {
                best = v;
                p = r;
            }
        }
        if best <= 1e-14 * scale {
            return Err(Error::Singular("solve_lu"));
        }
        if p != col {
            for c in 0..n {
                let t = lu.get(col, c);
                lu.set(col, c, lu.get(p, c));
                lu.set(p, c, t);
            }
            let t = x[col];
            x[col] = x[p];
            x[p] = t;
        }
        let piv = lu.get(col, col);
        for r in (col + 1)..n {
            let f = lu.get(r, col) / piv;
            if f == 0.0 {
                continue;
            }
            lu.set(r, col, 0.0);
            for c in (col + 1)..n {
                lu.add_to(r, c, -f * lu.get(col, c));
            }
            x[r] -= f * x[col];
        }
    }
    // back substitution
    for col in (0..n).rev() {
        let mut v = x[col];
        for c in (col + 1)..n {
            v -= lu.get(col, c) * x[c];
        }
        x[col] = v / lu.get(col, col);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    #[test]
    fn weighted_norm_identity_metric() {
        let x = Vector::from_slice(&[1.0, 2.0]);
        let g = Matrix::Dense(DenseMatrix::identity(2));
        assert_eq!(weighted_norm_sq(&x, &g).unwrap(), 5.0);
    }

    #[test]
    fn weighted_norm_rank_one_null_direction() {
        // hand expansion: (1,1)ᵀ[[1,-1],[-1,1]](1,1) = 0
        let x = Vector::from_slice(&[1.0, 1.0]);
        let g = Matrix::Dense(DenseMatrix::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]));
        assert_eq!(weighted_norm_sq(&x, &g).unwrap(), 0.0);
    }

    #[test]
    fn weighted_norm_zero_vector() {
        let x = Vector::zeros(3);
        let g = Matrix::Dense(DenseMatrix::from_rows(&[
            &[4.0, 1.0, 0.0],
            &[1.0, -2.0, 3.0],
            &[0.0, 3.0, 9.0],
        ]));
        assert_eq!(weighted_norm_sq(&x, &g).unwrap(), 0.0);
    }

    #[test]
    fn weighted_norm_dim_mismatch() {
        let x = Vector::zeros(3);
        let g = Matrix::Dense(DenseMatrix::identity(2));
        assert!(weighted_norm_sq(&x, &g).is_err());
    }

    #[test]
    fn spectral_diagonal() {
        let mut rng = SeededRng::new(11);
        let m = Matrix::Dense(DenseMatrix::from_rows(&[&[3.0, 0.0], &[0.0, 1.0]]));
        let est = spectral_norm_est(&m, 1e-10, 500, &mut rng).unwrap();
        assert!(est.converged);
        assert!((est.value - 3.0).abs() < 1e-8, "got {}", est.value);
    }

    #[test]
    fn spectral_identity() {
        let mut rng = SeededRng::new(5);
        let m = Matrix::scaled_identity(6, 1.0);
        let est = spectral_norm_est(&m, 1e-10, 500, &mut rng).unwrap();
        assert!(est.converged);
        assert!((est.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_nilpotent_block() {
        // singular values of [[0,2],[0,0]] are {2, 0}
        let mut rng = SeededRng::new(9);
        let m = Matrix::Dense(DenseMatrix::from_rows(&[&[0.0, 2.0], &[0.0, 0.0]]));
        let est = spectral_norm_est(&m, 1e-10, 500, &mut rng).unwrap();
        assert!((est.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn spectral_zero_matrix() {
        let mut rng = SeededRng::new(2);
        let m = Matrix::Dense(DenseMatrix::zeros(3, 3));
        let est = spectral_norm_est(&m, 1e-8, 100, &mut rng).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.converged);
    }

    #[test]
    fn psd_identity_true() {
        assert!(psd_certify(&DenseMatrix::identity(4), 0.0).unwrap());
    }

    #[test]
    fn psd_indefinite_false() {
        let s = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        assert!(!psd_certify(&s, 0.0).unwrap());
    }

    #[test]
    fn psd_semidefinite_boundary() {
        // eigenvalues {2, 0}
        let s = DenseMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(psd_certify(&s, 0.0).unwrap());
    }

    #[test]
    fn psd_rejects_asymmetric() {
        let s = DenseMatrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert!(matches!(psd_certify(&s, 0.0), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn lu_solves_small_system() {
        let a = DenseMatrix::from_rows(&[&[0.0, 2.0], &[1.0, 1.0]]);
        let b = Vector::from_slice(&[2.0, 3.0]);
        let x = solve_lu(&a, &b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lu_detects_singular() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let b = Vector::from_slice(&[1.0, 2.0]);
        assert!(matches!(solve_lu(&a, &b), Err(Error::Singular(_))));
    }
}
