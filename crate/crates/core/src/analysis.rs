//! Construction and certification of the block matrices that control the
//! solvers' convergence: the transfer matrix `P` relating successive iterate
//! gaps, the forms `Q`, `Q̃ = Q·P⁻¹`, `G̃ = PᵀQ̃ + Q̃P - PᵀQ̃P`, their
//! single-block and multi-block specializations, and the monotone map that
//! characterizes the saddle point as a variational inequality.
//!
//! Everything here is built dense: these matrices exist for certification
//! and tests, not for the solver hot path.

use crate::error::{Error, Result};
use crate::linalg::psd_certify;
use crate::matrix::{DenseMatrix, Matrix};
use crate::region::{in_region, omega_coeffs, RegionId, StepsizePair};
use crate::vector::Vector;
use alloc::vec::Vec;

/// Outcome of certifying one `(τ, s, β)` configuration against a concrete
/// set of analysis blocks.
#[derive(Clone, Debug)]
pub struct CertReport {
    /// Max-abs entry of `G̃ - (PᵀQ̃ + Q̃P - PᵀQ̃P)`.
    pub identity_residual: f64,
    /// Whether `Q̃` certified positive semidefinite (shift `1e-9·scale`).
    pub qtilde_psd: bool,
    pub omegas: (f64, f64, f64),
    /// Membership of `(τ, s)` in the closed region.
    pub region_member: bool,
}

/// The block lower-triangular matrix with `wᵏ - wᵏ⁺¹ = P(wᵏ - w̃ᵏ)`:
/// identity on the `x` and `y` blocks, `[-sβB, (τ+s)I]` on the dual row.
/// `n1` is the x-block dimension.
pub fn build_p(p: StepsizePair, beta: f64, b: &Matrix, n1: usize) -> DenseMatrix {
    let n2 = b.cols();
    let n = b.rows();
    let dim = n1 + n2 + n;
    let mut m = DenseMatrix::zeros(dim, dim);
    for i in 0..(n1 + n2) {
        m.set(i, i, 1.0);
    }
    let bd = b.to_dense();
    for r in 0..n {
        for c in 0..n2 {
            m.set(n1 + n2 + r, n1 + c, -p.s * beta * bd.get(r, c));
        }
        m.set(n1 + n2 + r, n1 + n2 + r, p.tau + p.s);
    }
    m
}

fn check_analysis_inputs(
    p: StepsizePair,
    beta: f64,
    dk: &DenseMatrix,
    l: &DenseMatrix,
    b: &Matrix,
) -> Result<()> {
    if beta <= 0.0 {
        return Err(Error::InvalidParam(alloc::format!(
            "beta must be positive, got {beta}"
        )));
    }
    if p.tau + p.s == 0.0 {
        return Err(Error::Singular("analysis transfer matrix (tau + s = 0)"));
    }
    if !dk.is_symmetric(1e-10) {
        return Err(Error::Asymmetric("Dk block"));
    }
    if !l.is_symmetric(1e-10) {
        return Err(Error::Asymmetric("L block"));
    }
    if l.rows() != b.cols() {
        return Err(Error::DimMismatch {
            what: "L vs B columns",
            expected: b.cols(),
            got: l.rows(),
        });
    }
    Ok(())
}

/// Builds the triple `(Q, Q̃, G̃)`:
///
/// ```text
/// Q  = [Dk         |                        |        ]
///      [           | L + βBᵀB               | -τ Bᵀ  ]
///      [           | -B                     | (1/β)I ]
/// Q̃  = [Dk         |                        |              ]
///      [           | L + (1-τs/(τ+s))βBᵀB   | -(τ/(τ+s))Bᵀ ]
///      [           | -(τ/(τ+s))B            | 1/(β(τ+s))·I ]
/// G̃  = [Dk         |                        |              ]
///      [           | L + (1-s)βBᵀB          | (s-1)Bᵀ      ]
///      [           | (s-1)B                 | (2-τ-s)/β·I  ]
/// ```
///
/// `Q̃·P = Q` holds by construction (that is the defining relation
/// `Q̃ = Q·P⁻¹`).
pub fn build_analysis_matrices(
    p: StepsizePair,
    beta: f64,
    dk: &DenseMatrix,
    l: &DenseMatrix,
    b: &Matrix,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    check_analysis_inputs(p, beta, dk, l, b)?;
    let n1 = dk.rows();
    let n2 = b.cols();
    let n = b.rows();
    let dim = n1 + n2 + n;
    let sigma = p.tau + p.s;
    let bd = b.to_dense();
    let bt = bd.transpose();
    let btb = bt.matmul(&bd);

    // yy is the y-block; upper scales Bᵀ in the (y, λ) block, lower scales B
    // in the (λ, y) block, lam scales the identity on the dual block. Q is
    // the only asymmetric one (upper -τBᵀ, lower -B).
    let assemble = |yy: &DenseMatrix, upper: f64, lower: f64, lam: f64| -> DenseMatrix {
        let mut m = DenseMatrix::zeros(dim, dim);
        m.set_block(0, 0, dk);
        m.set_block(n1, n1, yy);
        for r in 0..n {
            for c in 0..n2 {
                let v = bd.get(r, c);
                m.set(n1 + c, n1 + n2 + r, upper * v);
                m.set(n1 + n2 + r, n1 + c, lower * v);
            }
            m.set(n1 + n2 + r, n1 + n2 + r, lam);
        }
        m
    };

    let q_yy = l.add(&btb.scaled(beta));
    let q = assemble(&q_yy, -p.tau, -1.0, 1.0 / beta);

    let qt_yy = l.add(&btb.scaled((1.0 - p.tau * p.s / sigma) * beta));
    let c = -p.tau / sigma;
    let qtilde = assemble(&qt_yy, c, c, 1.0 / (beta * sigma));

    let gt_yy = l.add(&btb.scaled((1.0 - p.s) * beta));
    let gtilde = assemble(&gt_yy, p.s - 1.0, p.s - 1.0, (2.0 - p.tau - p.s) / beta);

    Ok((q, qtilde, gtilde))
}

/// `G̃ - (PᵀQ̃ + Q̃P - PᵀQ̃P)`, the defect of the seminorm-splitting identity.
pub fn identity_defect(
    p_mat: &DenseMatrix,
    qtilde: &DenseMatrix,
    gtilde: &DenseMatrix,
) -> DenseMatrix {
    let pt = p_mat.transpose();
    let ptq = pt.matmul(qtilde);
    let rhs = ptq
        .add(&qtilde.matmul(p_mat))
        .sub(&ptq.matmul(p_mat));
    gtilde.sub(&rhs)
}

/// Builds all analysis matrices for one configuration and reports the
/// identity defect, positive semidefiniteness of `Q̃`, the ω coefficients
/// and region membership. The report is computed even for pairs outside the
/// region, as long as `τ+s ≠ 0` keeps the transfer matrix invertible.
pub fn certify(
    p: StepsizePair,
    beta: f64,
    dk: &DenseMatrix,
    l: &DenseMatrix,
    b: &Matrix,
) -> Result<CertReport> {
    let (_q, qtilde, gtilde) = build_analysis_matrices(p, beta, dk, l, b)?;
    let p_mat = build_p(p, beta, b, dk.rows());
    let defect = identity_defect(&p_mat, &qtilde, &gtilde);
    let scale = qtilde.max_abs();
    let qtilde_psd = psd_certify(&qtilde, 1e-9 * scale)?;
    let omegas = omega_coeffs(p, beta)?;
    Ok(CertReport {
        identity_residual: defect.max_abs(),
        qtilde_psd,
        omegas,
        region_member: in_region(p, RegionId::Delta),
    })
}

/// Reduced matrices for the augmented-Lagrangian variant (no y-block):
/// `Q̃ = diag(Dk, 1/(sβ)·I)` and `G̃ = diag(Dk, (2-s)/β·I)`. The dual block
/// of `G̃` is positive semidefinite exactly when `s ≤ 2`.
pub fn build_alm_matrices(
    dk: &DenseMatrix,
    beta: f64,
    s: f64,
    n: usize,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if beta <= 0.0 || s == 0.0 {
        return Err(Error::InvalidParam(alloc::format!(
            "alm matrices need beta > 0 and s ≠ 0, got beta={beta}, s={s}"
        )));
    }
    let n1 = dk.rows();
    let dim = n1 + n;
    let mut qtilde = DenseMatrix::zeros(dim, dim);
    let mut gtilde = DenseMatrix::zeros(dim, dim);
    qtilde.set_block(0, 0, dk);
    gtilde.set_block(0, 0, dk);
    for i in 0..n {
        qtilde.set(n1 + i, n1 + i, 1.0 / (s * beta));
        gtilde.set(n1 + i, n1 + i, (2.0 - s) / beta);
    }
    Ok((qtilde, gtilde))
}

/// The coupled proximal metric of the partially-Jacobi update:
/// `L_i` on the diagonal, `-βB_iᵀB_l` off the diagonal.
pub fn build_block_metric(
    beta: f64,
    ls: &[DenseMatrix],
    bs: &[Matrix],
) -> Result<DenseMatrix> {
    if ls.len() != bs.len() || ls.is_empty() {
        return Err(Error::InvalidParam(alloc::string::String::from(
            "block metric needs matching, nonempty L and B lists",
        )));
    }
    let dims: Vec<usize> = bs.iter().map(|b| b.cols()).collect();
    let total: usize = dims.iter().sum();
    let mut m = DenseMatrix::zeros(total, total);
    let mut r0 = 0;
    for (i, li) in ls.iter().enumerate() {
        if li.rows() != dims[i] || li.cols() != dims[i] {
            return Err(Error::DimMismatch {
                what: "block metric L_i",
                expected: dims[i],
                got: li.rows(),
            });
        }
        m.set_block(r0, r0, li);
        let bi_t = bs[i].to_dense().transpose();
        let mut c0 = 0;
        for (l, bl) in bs.iter().enumerate() {
            if l != i {
                let cross = bi_t.matmul(&bl.to_dense()).scaled(-beta);
                m.set_block(r0, c0, &cross);
            }
            c0 += dims[l];
        }
        r0 += dims[i];
    }
    Ok(m)
}

/// Horizontal stack `[B₁ B₂ … B_q]` as a dense matrix.
pub fn stack_blocks(bs: &[Matrix]) -> Result<DenseMatrix> {
    if bs.is_empty() {
        return Err(Error::InvalidParam(alloc::string::String::from(
            "stack_blocks needs at least one block",
        )));
    }
    let n = bs[0].rows();
    let total: usize = bs.iter().map(|b| b.cols()).sum();
    let mut m = DenseMatrix::zeros(n, total);
    let mut c0 = 0;
    for b in bs {
        if b.rows() != n {
            return Err(Error::DimMismatch {
                what: "stack_blocks rows",
                expected: n,
                got: b.rows(),
            });
        }
        let bd = b.to_dense();
        m.set_block(0, c0, &bd);
        c0 += b.cols();
    }
    Ok(m)
}

/// Multi-block `(Q̃, G̃)`: the blocks `(B₁,…,B_q)` are treated as one stacked
/// block with the coupled metric from [`build_block_metric`], which
/// reproduces the partially-Jacobi block forms (diagonal
/// `L_i + (1-τs/(τ+s))βB_iᵀB_i`, couplings `-(τs/(τ+s))βB_iᵀB_l`, and the
/// `G̃` analogues with `(1-s)` and `-s`).
pub fn build_multiblock_matrices(
    p: StepsizePair,
    beta: f64,
    dk: &DenseMatrix,
    ls: &[DenseMatrix],
    bs: &[Matrix],
) -> Result<(DenseMatrix, DenseMatrix)> {
    let lbar = build_block_metric(beta, ls, bs)?;
    let bbar = Matrix::Dense(stack_blocks(bs)?);
    let (_q, qtilde, gtilde) = build_analysis_matrices(p, beta, dk, &lbar, &bbar)?;
    Ok((qtilde, gtilde))
}

/// The monotone map `J(w) = (-Aᵀλ; -Bᵀλ; Ax + By - b)` of the saddle-point
/// variational inequality. Affine and skew-symmetric:
/// `(w - w̄)ᵀ[J(w) - J(w̄)] = 0` for all pairs.
pub fn vi_map(
    x: &Vector,
    y: &Vector,
    lambda: &Vector,
    a: &Matrix,
    b: &Matrix,
    rhs: &Vector,
) -> Result<Vector> {
    if a.cols() != x.len() || b.cols() != y.len() || a.rows() != lambda.len()
        || b.rows() != lambda.len() || rhs.len() != lambda.len()
    {
        return Err(Error::DimMismatch {
            what: "vi_map blocks",
            expected: lambda.len(),
            got: a.rows(),
        });
    }
    let top = a.matvec_t(lambda).scaled(-1.0);
    let mid = b.matvec_t(lambda).scaled(-1.0);
    let mut res = a.matvec(x);
    res.axpy(1.0, &b.matvec(y));
    res.axpy(-1.0, rhs);
    Ok(Vector::concat(&[&top, &mid, &res]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use alloc::vec;

    fn pair(tau: f64, s: f64) -> StepsizePair {
        StepsizePair::new(tau, s)
    }

    fn one(v: f64) -> DenseMatrix {
        DenseMatrix::from_rows(&[&[v]])
    }

    #[test]
    fn p_matrix_scalar_case() {
        // τ=0, s=1, β=1, B=[-1]: the (3,2) entry is -sβB = 1
        let b = Matrix::Dense(one(-1.0));
        let p = build_p(pair(0.0, 1.0), 1.0, &b, 1);
        let expect = DenseMatrix::from_rows(&[
            &[1.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            &[0.0, 1.0, 1.0],
        ]);
        assert_eq!(p, expect);
    }

    #[test]
    fn p_matrix_zero_coupling() {
        let b = Matrix::Dense(DenseMatrix::zeros(2, 3));
        let p = build_p(pair(0.3, 0.4), 2.0, &b, 2);
        for r in 0..7 {
            for c in 0..7 {
                let expect = if r != c {
                    0.0
                } else if r < 5 {
                    1.0
                } else {
                    0.7
                };
                assert!((p.get(r, c) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn p_matrix_s_zero_drops_coupling() {
        let b = Matrix::Dense(DenseMatrix::from_rows(&[&[3.0, -2.0]]));
        let p = build_p(pair(0.5, 0.0), 4.0, &b, 1);
        assert_eq!(p.get(3, 1), 0.0);
        assert_eq!(p.get(3, 2), 0.0);
    }

    #[test]
    fn analysis_matrices_hand_case() {
        // τ=0, s=1, β=1, Dk=[1], L=[0], B=[-1]
        let b = Matrix::Dense(one(-1.0));
        let (q, qt, gt) =
            build_analysis_matrices(pair(0.0, 1.0), 1.0, &one(1.0), &one(0.0), &b).unwrap();
        let id3 = DenseMatrix::identity(3);
        assert_eq!(qt, id3);
        let g_expect = DenseMatrix::from_rows(&[
            &[1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0],
        ]);
        assert_eq!(gt, g_expect);
        // Q has the y-λ coupling -τBᵀ = 0 here and L+βBᵀB = 1
        assert_eq!(q.get(1, 1), 1.0);
        assert_eq!(q.get(2, 1), 1.0); // -B
        assert_eq!(q.get(2, 2), 1.0); // 1/β
    }

    #[test]
    fn qtilde_times_p_recovers_q() {
        let mut rng = SeededRng::new(21);
        for _ in 0..50 {
            let tau = rng.range_f64(-0.9, 1.0);
            let s = rng.range_f64(0.05, 1.5);
            if tau + s <= 0.01 {
                continue;
            }
            let beta = rng.range_f64(0.1, 10.0);
            let mut bd = DenseMatrix::zeros(3, 4);
            for r in 0..3 {
                for c in 0..4 {
                    bd.set(r, c, rng.range_f64(-1.0, 1.0));
                }
            }
            let b = Matrix::Dense(bd);
            let dk = DenseMatrix::scaled_identity(2, rng.range_f64(0.0, 2.0));
            let l = DenseMatrix::scaled_identity(4, rng.range_f64(0.0, 2.0));
            let p = pair(tau, s);
            let (q, qt, _gt) = build_analysis_matrices(p, beta, &dk, &l, &b).unwrap();
            let p_mat = build_p(p, beta, &b, 2);
            let defect = qt.matmul(&p_mat).sub(&q).max_abs();
            assert!(defect <= 1e-10 * q.max_abs().max(1.0), "defect {defect}");
        }
    }

    #[test]
    fn certify_hand_case() {
        let b = Matrix::Dense(one(-1.0));
        let rep = certify(pair(0.0, 1.0), 1.0, &one(1.0), &one(0.0), &b).unwrap();
        assert!(rep.identity_residual <= 1e-12);
        assert!(rep.qtilde_psd);
        assert!(rep.region_member);
        assert_eq!(rep.omegas, (1.0, 0.0, 1.0));
    }

    #[test]
    fn certify_outside_region_still_reports() {
        // (1.5, 0.2) violates τ ≤ 1; τ+s = 1.7 keeps P invertible, so the
        // report is still produced
        let b = Matrix::Dense(one(1.0));
        let rep = certify(pair(1.5, 0.2), 1.0, &one(1.0), &one(0.0), &b).unwrap();
        assert!(!rep.region_member);
        assert!(rep.identity_residual <= 1e-12);
    }

    #[test]
    fn certify_rejects_singular_transfer() {
        let b = Matrix::Dense(one(1.0));
        let err = certify(pair(0.5, -0.5), 1.0, &one(1.0), &one(0.0), &b);
        assert!(matches!(err, Err(Error::Singular(_))));
    }

    #[test]
    fn alm_matrices_and_dual_block_sign() {
        let dk = DenseMatrix::scaled_identity(2, 0.5);
        let (qt, gt) = build_alm_matrices(&dk, 2.0, 1.5, 3).unwrap();
        assert!((qt.get(3, 3) - 1.0 / 3.0).abs() < 1e-15);
        assert!((gt.get(3, 3) - 0.25).abs() < 1e-15);
        // dual block of G̃ is PSD iff s ≤ 2
        for (s, expect) in [(1.9, true), (2.0, true), (2.1, false)] {
            let (_qt, gt) = build_alm_matrices(&dk, 1.0, s, 2).unwrap();
            let mut lam_block = DenseMatrix::zeros(2, 2);
            for i in 0..2 {
                for j in 0..2 {
                    lam_block.set(i, j, gt.get(2 + i, 2 + j));
                }
            }
            assert_eq!(psd_certify(&lam_block, 0.0).unwrap(), expect, "s = {s}");
        }
    }

    #[test]
    fn multiblock_forms_match_stacked_construction() {
        let mut rng = SeededRng::new(4);
        let p = pair(0.7, 0.9);
        let beta = 1.3;
        let mut b1 = DenseMatrix::zeros(2, 2);
        let mut b2 = DenseMatrix::zeros(2, 1);
        for r in 0..2 {
            for c in 0..2 {
                b1.set(r, c, rng.range_f64(-1.0, 1.0));
            }
            b2.set(r, 0, rng.range_f64(-1.0, 1.0));
        }
        let bs = vec![Matrix::Dense(b1.clone()), Matrix::Dense(b2.clone())];
        let ls = vec![
            DenseMatrix::scaled_identity(2, 3.0),
            DenseMatrix::scaled_identity(1, 2.0),
        ];
        let dk = DenseMatrix::identity(2);
        let (qt, gt) = build_multiblock_matrices(p, beta, &dk, &ls, &bs).unwrap();

        // spot-check the published block forms
        let sigma = p.tau + p.s;
        let b1tb2 = b1.transpose().matmul(&b2);
        // Q̃ y1-y2 coupling: -(τs/(τ+s))·β·B₁ᵀB₂
        let expect_q = b1tb2.scaled(-(p.tau * p.s / sigma) * beta);
        for r in 0..2 {
            assert!((qt.get(2 + r, 4) - expect_q.get(r, 0)).abs() < 1e-12);
        }
        // G̃ y1-y2 coupling: -s·β·B₁ᵀB₂
        let expect_g = b1tb2.scaled(-p.s * beta);
        for r in 0..2 {
            assert!((gt.get(2 + r, 4) - expect_g.get(r, 0)).abs() < 1e-12);
        }
        // diagonal y1 block of G̃: L₁ + (1-s)βB₁ᵀB₁
        let expect_d = DenseMatrix::scaled_identity(2, 3.0)
            .add(&b1.transpose().matmul(&b1).scaled((1.0 - p.s) * beta));
        for r in 0..2 {
            for c in 0..2 {
                assert!((gt.get(2 + r, 2 + c) - expect_d.get(r, c)).abs() < 1e-12);
            }
        }

        // and the P-identity holds with the stacked block
        let bbar = Matrix::Dense(stack_blocks(&bs).unwrap());
        let p_mat = build_p(p, beta, &bbar, 2);
        let defect = identity_defect(&p_mat, &qt, &gt).max_abs();
        assert!(defect <= 1e-10 * gt.max_abs().max(1.0));
    }

    #[test]
    fn vi_map_cases() {
        let a = Matrix::Dense(one(1.0));
        let b = Matrix::Dense(one(-1.0));
        // w = 0 maps to (0, 0, -b)
        let rhs = Vector::from_slice(&[3.0]);
        let j = vi_map(
            &Vector::zeros(1),
            &Vector::zeros(1),
            &Vector::zeros(1),
            &a,
            &b,
            &rhs,
        )
        .unwrap();
        assert_eq!(j.as_slice(), &[0.0, 0.0, -3.0]);
        // A=1, B=-1, b=0, w=(2,2,3) → (-3, 3, 0)
        let j = vi_map(
            &Vector::from_slice(&[2.0]),
            &Vector::from_slice(&[2.0]),
            &Vector::from_slice(&[3.0]),
            &a,
            &b,
            &Vector::zeros(1),
        )
        .unwrap();
        assert_eq!(j.as_slice(), &[-3.0, 3.0, 0.0]);
    }

    #[test]
    fn vi_map_skew_symmetry() {
        let mut rng = SeededRng::new(17);
        let mut ad = DenseMatrix::zeros(2, 3);
        let mut bd = DenseMatrix::zeros(2, 2);
        for r in 0..2 {
            for c in 0..3 {
                ad.set(r, c, rng.range_f64(-2.0, 2.0));
            }
            for c in 0..2 {
                bd.set(r, c, rng.range_f64(-2.0, 2.0));
            }
        }
        let a = Matrix::Dense(ad);
        let b = Matrix::Dense(bd);
        let rhs = Vector::from_slice(&[0.3, -0.7]);
        let draw = |rng: &mut SeededRng, n: usize| {
            let mut v = Vector::zeros(n);
            for i in 0..n {
                v[i] = rng.range_f64(-5.0, 5.0);
            }
            v
        };
        for _ in 0..1000 {
            let (x1, y1, l1) = (draw(&mut rng, 3), draw(&mut rng, 2), draw(&mut rng, 2));
            let (x2, y2, l2) = (draw(&mut rng, 3), draw(&mut rng, 2), draw(&mut rng, 2));
            let j1 = vi_map(&x1, &y1, &l1, &a, &b, &rhs).unwrap();
            let j2 = vi_map(&x2, &y2, &l2, &a, &b, &rhs).unwrap();
            let w1 = Vector::concat(&[&x1, &y1, &l1]);
            let w2 = Vector::concat(&[&x2, &y2, &l2]);
            let gap = w1.sub(&w2).dot(&j1.sub(&j2));
            let scale = (w1.norm() + w2.norm()) * (w1.norm() + w2.norm());
            assert!(gap.abs() <= 1e-10 * scale.max(1.0), "gap {gap}");
        }
    }
}
