//! Problem instances: the smooth finite-sum oracle, nonsmooth proximal
//! blocks, constraint data, feasible sets, and exact reference oracles for
//! the shipped test problems.

use crate::error::{Error, Result};
use crate::float;
use crate::linalg::{psd_certify, solve_lu, spectral_norm_est};
use crate::matrix::{CsrMatrix, DenseMatrix, Matrix};
use crate::rng::SeededRng;
use crate::vector::Vector;
use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

/// The smooth part `f(x) = (1/N)·Σⱼ fⱼ(x)` exposed through component and
/// full oracles, together with the Lipschitz constant `ν` of the component
/// gradients in the metric `H`:
/// `‖∇fⱼ(x₁) - ∇fⱼ(x₂)‖_{H⁻¹} ≤ ν·‖x₁ - x₂‖_H`.
pub trait SmoothSum: Send + Sync {
    /// Number of components `N`.
    fn component_count(&self) -> usize;
    /// Dimension of `x`.
    fn dim(&self) -> usize;
    fn component_value(&self, j: usize, x: &Vector) -> f64;
    fn component_grad(&self, j: usize, x: &Vector) -> Vector;
    fn lipschitz_nu(&self) -> f64;

    fn full_value(&self, x: &Vector) -> f64 {
        let n = self.component_count();
        let sum: f64 = (0..n).map(|j| self.component_value(j, x)).sum();
        sum / n as f64
    }

    /// Average of the component gradients, accumulated in index order so
    /// repeated evaluations are bit-identical.
    fn full_grad(&self, x: &Vector) -> Vector {
        let n = self.component_count();
        let mut acc = Vector::zeros(self.dim());
        for j in 0..n {
            acc.axpy(1.0, &self.component_grad(j, x));
        }
        acc.scale(1.0 / n as f64);
        acc
    }
}

/// Overflow-safe `log(1 + exp(-m))`.
pub fn logistic_loss(margin: f64) -> f64 {
    if margin >= 0.0 {
        float::ln_1p(float::exp(-margin))
    } else {
        -margin + float::ln_1p(float::exp(margin))
    }
}

/// Overflow-safe `1 / (1 + exp(m))`.
fn logistic_sigma_neg(margin: f64) -> f64 {
    if margin >= 0.0 {
        let e = float::exp(-margin);
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + float::exp(margin))
    }
}

/// Value and gradient of one logistic component
/// `log(1 + exp(-b·⟨a, x⟩))`; the gradient is `-b·a / (1 + exp(b·⟨a, x⟩))`.
/// Saturates smoothly for large margins, no overflow.
pub fn logistic_component(a: &Vector, b: f64, x: &Vector) -> (f64, Vector) {
    let margin = b * a.dot(x);
    let value = logistic_loss(margin);
    let grad = a.scaled(-b * logistic_sigma_neg(margin));
    (value, grad)
}

/// Logistic finite sum over a sparse feature matrix (one sample per row)
/// with ±1 labels.
pub struct LogisticSum {
    features: CsrMatrix,
    labels: Vector,
    nu: f64,
}

impl LogisticSum {
    /// `ν = (1/4)·max_j aⱼᵀH⁻¹aⱼ`, the tight logistic curvature bound in the
    /// diagonal metric `h_diag`.
    pub fn new(features: CsrMatrix, labels: Vector, h_diag: &Vector) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::DimMismatch {
                what: "logistic labels",
                expected: features.rows(),
                got: labels.len(),
            });
        }
        if h_diag.len() != features.cols() {
            return Err(Error::DimMismatch {
                what: "logistic metric",
                expected: features.cols(),
                got: h_diag.len(),
            });
        }
        if labels.iter().any(|b| *b != 1.0 && *b != -1.0) {
            return Err(Error::InvalidParam(format!(
                "logistic labels must be in {{-1, +1}}"
            )));
        }
        if features.rows() == 0 {
            return Err(Error::InvalidParam(format!("logistic needs samples")));
        }
        let mut max_sq = 0.0f64;
        for j in 0..features.rows() {
            let (idx, val) = features.row(j);
            let sq: f64 = idx
                .iter()
                .zip(val.iter())
                .map(|(c, v)| v * v / h_diag[*c])
                .sum();
            max_sq = max_sq.max(sq);
        }
        Ok(LogisticSum {
            features,
            labels,
            nu: 0.25 * max_sq,
        })
    }

    fn margin(&self, j: usize, x: &Vector) -> f64 {
        let (idx, val) = self.features.row(j);
        let dot: f64 = idx.iter().zip(val.iter()).map(|(c, v)| v * x[*c]).sum();
        self.labels[j] * dot
    }
}

impl SmoothSum for LogisticSum {
    fn component_count(&self) -> usize {
        self.features.rows()
    }

    fn dim(&self) -> usize {
        self.features.cols()
    }

    fn component_value(&self, j: usize, x: &Vector) -> f64 {
        logistic_loss(self.margin(j, x))
    }

    fn component_grad(&self, j: usize, x: &Vector) -> Vector {
        let factor = -self.labels[j] * logistic_sigma_neg(self.margin(j, x));
        let mut out = Vector::zeros(self.dim());
        let (idx, val) = self.features.row(j);
        for (c, v) in idx.iter().zip(val.iter()) {
            out[*c] = factor * v;
        }
        out
    }

    fn lipschitz_nu(&self) -> f64 {
        self.nu
    }
}

/// Quadratic finite sum `f(x) = ½xᵀPx + qᵀx` split into components with the
/// shared Hessian `P` and zero-mean linear offsets, so the component average
/// reproduces `f` and `ν` is exact and shared.
pub struct QuadraticSum {
    p: DenseMatrix,
    q: Vector,
    offsets: Vec<Vector>,
    nu: f64,
}

impl QuadraticSum {
    pub fn new(
        p: DenseMatrix,
        q: Vector,
        n_components: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if p.rows() != q.len() || p.cols() != q.len() {
            return Err(Error::DimMismatch {
                what: "quadratic sum",
                expected: q.len(),
                got: p.rows(),
            });
        }
        if n_components == 0 {
            return Err(Error::InvalidParam(format!("need at least one component")));
        }
        let dim = q.len();
        let mut offsets: Vec<Vector> = (0..n_components)
            .map(|_| {
                let mut r = Vector::zeros(dim);
                for i in 0..dim {
                    r[i] = rng.range_f64(-1.0, 1.0);
                }
                r
            })
            .collect();
        // force exact zero mean
        let mut mean = Vector::zeros(dim);
        for r in offsets.iter() {
            mean.axpy(1.0 / n_components as f64, r);
        }
        for r in offsets.iter_mut() {
            r.axpy(-1.0, &mean);
        }
        if n_components == 1 {
            offsets[0].fill(0.0);
        }
        let mut srng = SeededRng::new(0x5eed);
        let est = spectral_norm_est(&Matrix::Dense(p.clone()), 1e-12, 10_000, &mut srng)?;
        let nu = (est.value * (1.0 + 1e-9)).max(1e-12);
        Ok(QuadraticSum { p, q, offsets, nu })
    }
}

impl SmoothSum for QuadraticSum {
    fn component_count(&self) -> usize {
        self.offsets.len()
    }

    fn dim(&self) -> usize {
        self.q.len()
    }

    fn component_value(&self, j: usize, x: &Vector) -> f64 {
        0.5 * x.dot(&self.p.matvec(x)) + self.q.dot(x) + self.offsets[j].dot(x)
    }

    fn component_grad(&self, j: usize, x: &Vector) -> Vector {
        let mut g = self.p.matvec(x);
        g.axpy(1.0, &self.q);
        g.axpy(1.0, &self.offsets[j]);
        g
    }

    fn lipschitz_nu(&self) -> f64 {
        self.nu
    }
}

/// Componentwise soft shrinkage `sign(vᵢ)·max(|vᵢ| - κ, 0)`, the proximal
/// mapping of `κ‖·‖₁`.
pub fn soft_shrink(kappa: f64, v: &Vector) -> Result<Vector> {
    if kappa < 0.0 {
        return Err(Error::InvalidParam(format!(
            "shrink threshold must be nonnegative, got {kappa}"
        )));
    }
    let mut out = Vector::zeros(v.len());
    for i in 0..v.len() {
        let vi = v[i];
        let m = float::abs(vi) - kappa;
        out[i] = if m > 0.0 {
            m * if vi < 0.0 { -1.0 } else { 1.0 }
        } else {
            0.0
        };
    }
    Ok(out)
}

/// A nonsmooth block objective with its proximal mapping
/// `prox(γ, v) = argmin value(y) + (γ/2)‖y - v‖²`.
#[derive(Clone, Debug)]
pub enum NonsmoothBlock {
    /// Identically zero; prox is the identity.
    Zero,
    /// `weight·‖y‖₁`
    L1 { weight: f64 },
    /// `½yᵀPy + qᵀy` (P symmetric PSD)
    Quadratic { p: DenseMatrix, q: Vector },
}

impl NonsmoothBlock {
    pub fn value(&self, y: &Vector) -> f64 {
        match self {
            NonsmoothBlock::Zero => 0.0,
            NonsmoothBlock::L1 { weight } => {
                weight * y.iter().map(|v| float::abs(*v)).sum::<f64>()
            }
            NonsmoothBlock::Quadratic { p, q } => 0.5 * y.dot(&p.matvec(y)) + q.dot(y),
        }
    }

    pub fn prox(&self, gamma: f64, v: &Vector) -> Result<Vector> {
        if gamma <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "prox metric must be positive, got {gamma}"
            )));
        }
        match self {
            NonsmoothBlock::Zero => Ok(v.clone()),
            NonsmoothBlock::L1 { weight } => soft_shrink(weight / gamma, v),
            NonsmoothBlock::Quadratic { p, q } => {
                // (P + γI) y = γv - q
                let n = v.len();
                let mut m = p.clone();
                for i in 0..n {
                    m.add_to(i, i, gamma);
                }
                let mut rhs = v.scaled(gamma);
                rhs.axpy(-1.0, q);
                solve_lu(&m, &rhs)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, NonsmoothBlock::Zero)
    }

    /// Distance (max norm) from `target` to the subdifferential at `y`;
    /// zero means `target ∈ ∂g(y)`, the block's stationarity condition.
    pub fn subgradient_distance(&self, y: &Vector, target: &Vector) -> f64 {
        match self {
            NonsmoothBlock::Zero => target.norm_inf(),
            NonsmoothBlock::L1 { weight } => {
                let mut worst = 0.0f64;
                for i in 0..y.len() {
                    let t = target[i];
                    let d = if y[i] > 0.0 {
                        float::abs(t - weight)
                    } else if y[i] < 0.0 {
                        float::abs(t + weight)
                    } else {
                        (float::abs(t) - weight).max(0.0)
                    };
                    worst = worst.max(d);
                }
                worst
            }
            NonsmoothBlock::Quadratic { p, q } => {
                let mut g = p.matvec(y);
                g.axpy(1.0, q);
                g.axpy(-1.0, target);
                g.norm_inf()
            }
        }
    }
}

/// Closed convex feasible set with a Euclidean projection.
#[derive(Clone, Debug)]
pub enum FeasibleSet {
    Whole,
    Box { lo: Vector, hi: Vector },
    Ball { center: Vector, radius: f64 },
}

impl FeasibleSet {
    pub fn is_whole(&self) -> bool {
        matches!(self, FeasibleSet::Whole)
    }

    pub fn project(&self, v: &mut Vector) {
        match self {
            FeasibleSet::Whole => {}
            FeasibleSet::Box { lo, hi } => {
                for i in 0..v.len() {
                    v[i] = v[i].max(lo[i]).min(hi[i]);
                }
            }
            FeasibleSet::Ball { center, radius } => {
                let d = v.sub(center);
                let n = d.norm();
                if n > *radius {
                    let scale = radius / n;
                    for i in 0..v.len() {
                        v[i] = center[i] + scale * d[i];
                    }
                }
            }
        }
    }
}

/// Linear constraint `A·x + Σᵢ Bᵢ·yᵢ = b`. The block list is empty for
/// equality-constrained problems without a nonsmooth part, a single `B` for
/// the two-block problem, `[B, C]` for the three-block one.
#[derive(Clone, Debug)]
pub struct ConstraintData {
    pub a: Matrix,
    pub blocks: Vec<Matrix>,
    pub b: Vector,
}

impl ConstraintData {
    pub fn validate(&self) -> Result<()> {
        let n = self.a.rows();
        if self.b.len() != n {
            return Err(Error::DimMismatch {
                what: "constraint rhs",
                expected: n,
                got: self.b.len(),
            });
        }
        for blk in &self.blocks {
            if blk.rows() != n {
                return Err(Error::DimMismatch {
                    what: "constraint block rows",
                    expected: n,
                    got: blk.rows(),
                });
            }
        }
        Ok(())
    }

    /// `A·x + Σ Bᵢ·yᵢ - b`
    pub fn residual(&self, x: &Vector, ys: &[Vector]) -> Vector {
        let mut r = self.a.matvec(x);
        for (blk, y) in self.blocks.iter().zip(ys.iter()) {
            r.axpy(1.0, &blk.matvec(y));
        }
        r.axpy(-1.0, &self.b);
        r
    }
}

/// Exact primal-dual reference attached to instances whose saddle point is
/// known in closed form.
#[derive(Clone, Debug)]
pub struct ExactReference {
    pub x: Vector,
    pub ys: Vec<Vector>,
    pub lambda: Vector,
    pub f_star: f64,
}

/// A full optimization instance.
pub struct ProblemSpec {
    pub f: Box<dyn SmoothSum>,
    pub nonsmooth: Vec<NonsmoothBlock>,
    pub constraints: ConstraintData,
    pub x_set: FeasibleSet,
    pub block_sets: Vec<FeasibleSet>,
    /// Diagonal of the metric `H` (positive); identity by default.
    pub h_diag: Vector,
    pub exact_reference: Option<ExactReference>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        self.constraints.validate()?;
        if self.f.dim() != self.constraints.a.cols() {
            return Err(Error::DimMismatch {
                what: "smooth dim vs A columns",
                expected: self.constraints.a.cols(),
                got: self.f.dim(),
            });
        }
        if self.nonsmooth.len() != self.constraints.blocks.len()
            || self.block_sets.len() != self.constraints.blocks.len()
        {
            return Err(Error::DimMismatch {
                what: "nonsmooth block count",
                expected: self.constraints.blocks.len(),
                got: self.nonsmooth.len(),
            });
        }
        if self.h_diag.len() != self.f.dim() || self.h_diag.iter().any(|h| *h <= 0.0) {
            return Err(Error::InvalidParam(format!(
                "metric diagonal must be positive with dimension {}",
                self.f.dim()
            )));
        }
        Ok(())
    }

    pub fn x_dim(&self) -> usize {
        self.f.dim()
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.constraints.blocks.iter().map(|b| b.cols()).collect()
    }

    pub fn dual_dim(&self) -> usize {
        self.constraints.b.len()
    }

    /// `F(x, y) = f(x) + Σ gᵢ(yᵢ)`
    pub fn objective(&self, x: &Vector, ys: &[Vector]) -> f64 {
        let mut v = self.f.full_value(x);
        for (g, y) in self.nonsmooth.iter().zip(ys.iter()) {
            v += g.value(y);
        }
        v
    }
}

/// Graph-guided fused lasso: logistic loss plus `μ‖Ax‖₁` written in
/// constrained form `Ax - y = 0` with `A = [G; I]`.
pub fn make_fused_lasso(
    features: CsrMatrix,
    labels: Vector,
    graph: CsrMatrix,
    mu: f64,
) -> Result<ProblemSpec> {
    if mu <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "fused lasso weight must be positive, got {mu}"
        )));
    }
    let l = features.cols();
    if graph.cols() != l {
        return Err(Error::DimMismatch {
            what: "graph columns",
            expected: l,
            got: graph.cols(),
        });
    }
    let h_diag = {
        let mut h = Vector::zeros(l);
        h.fill(1.0);
        h
    };
    let f = LogisticSum::new(features, labels, &h_diag)?;
    let a = CsrMatrix::vstack(&graph, &CsrMatrix::scaled_identity(l, 1.0))?;
    let rows = a.rows();
    Ok(ProblemSpec {
        f: Box::new(f),
        nonsmooth: alloc::vec![NonsmoothBlock::L1 { weight: mu }],
        constraints: ConstraintData {
            a: Matrix::Csr(a),
            blocks: alloc::vec![Matrix::scaled_identity(rows, -1.0)],
            b: Vector::zeros(rows),
        },
        x_set: FeasibleSet::Whole,
        block_sets: alloc::vec![FeasibleSet::Whole],
        h_diag,
        exact_reference: None,
    })
}

/// Strictly convex quadratic test instance
/// `min ½xᵀP₁x + q₁ᵀx + ½yᵀP₂y + q₂ᵀy  s.t.  Ax + By = b`
/// with the smooth part split into `n_components` random components whose
/// average equals `f` exactly. The exact saddle point is attached when the
/// KKT system is nonsingular.
#[allow(clippy::too_many_arguments)]
pub fn make_quadratic_test(
    p1: DenseMatrix,
    q1: Vector,
    p2: DenseMatrix,
    q2: Vector,
    a: Matrix,
    bmat: Matrix,
    b: Vector,
    n_components: usize,
    rng: &mut SeededRng,
) -> Result<ProblemSpec> {
    if !psd_certify(&p1, 1e-9 * p1.max_abs().max(1.0))? {
        return Err(Error::InvalidParam(format!("P1 must be PSD")));
    }
    if !psd_certify(&p2, 1e-9 * p2.max_abs().max(1.0))? {
        return Err(Error::InvalidParam(format!("P2 must be PSD")));
    }
    let f = QuadraticSum::new(p1.clone(), q1.clone(), n_components, rng)?;
    let exact_reference = kkt_reference(&p1, &q1, &p2, &q2, &a, &bmat, &b)
        .ok()
        .map(|(x, y, lambda, f_star)| ExactReference {
            x,
            ys: alloc::vec![y],
            lambda,
            f_star,
        });
    let h_diag = {
        let mut h = Vector::zeros(q1.len());
        h.fill(1.0);
        h
    };
    let spec = ProblemSpec {
        f: Box::new(f),
        nonsmooth: alloc::vec![NonsmoothBlock::Quadratic { p: p2, q: q2 }],
        constraints: ConstraintData {
            a,
            blocks: alloc::vec![bmat],
            b,
        },
        x_set: FeasibleSet::Whole,
        block_sets: alloc::vec![FeasibleSet::Whole],
        h_diag,
        exact_reference,
    };
    spec.validate()?;
    Ok(spec)
}

/// Direct solve of the saddle-point system
///
/// ```text
/// [P₁  0  -Aᵀ] [x]   [-q₁]
/// [0   P₂ -Bᵀ] [y] = [-q₂]
/// [A   B   0 ] [λ]   [ b ]
/// ```
///
/// Returns `(x*, y*, λ*, F*)`; fails on a singular KKT matrix or when the
/// solution does not satisfy the system to `1e-10` relative accuracy.
pub fn kkt_reference(
    p1: &DenseMatrix,
    q1: &Vector,
    p2: &DenseMatrix,
    q2: &Vector,
    a: &Matrix,
    bmat: &Matrix,
    b: &Vector,
) -> Result<(Vector, Vector, Vector, f64)> {
    let n1 = q1.len();
    let n2 = q2.len();
    let n = b.len();
    let dim = n1 + n2 + n;
    let ad = a.to_dense();
    let bd = bmat.to_dense();
    let mut kkt = DenseMatrix::zeros(dim, dim);
    kkt.set_block(0, 0, p1);
    kkt.set_block(n1, n1, p2);
    kkt.set_block(0, n1 + n2, &ad.transpose().scaled(-1.0));
    kkt.set_block(n1, n1 + n2, &bd.transpose().scaled(-1.0));
    kkt.set_block(n1 + n2, 0, &ad);
    kkt.set_block(n1 + n2, n1, &bd);
    let rhs = Vector::concat(&[&q1.scaled(-1.0), &q2.scaled(-1.0), b]);
    let sol = solve_lu(&kkt, &rhs)?;
    let check = kkt.matvec(&sol).sub(&rhs).norm_inf();
    let scale = rhs.norm_inf().max(sol.norm_inf()).max(1.0);
    if check > 1e-10 * scale {
        return Err(Error::Singular("kkt_reference residual check"));
    }
    let x = Vector::from_slice(&sol.as_slice()[..n1]);
    let y = Vector::from_slice(&sol.as_slice()[n1..n1 + n2]);
    let lambda = Vector::from_slice(&sol.as_slice()[n1 + n2..]);
    let f_star =
        0.5 * x.dot(&p1.matvec(&x)) + q1.dot(&x) + 0.5 * y.dot(&p2.matvec(&y)) + q2.dot(&y);
    Ok((x, y, lambda, f_star))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn logistic_zero_margin() {
        let a = Vector::from_slice(&[1.0, 0.0]);
        let x = Vector::zeros(2);
        let (v, g) = logistic_component(&a, 1.0, &x);
        assert!((v - core::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g.as_slice(), &[-0.5, 0.0]);
    }

    #[test]
    fn logistic_saturates_without_overflow() {
        let a = Vector::from_slice(&[1.0, 0.0]);
        let x = Vector::from_slice(&[1000.0, 0.0]);
        let (v, g) = logistic_component(&a, 1.0, &x);
        assert!(v >= 0.0 && v < 1e-300);
        assert!(g.norm() < 1e-300);
        assert!(v.is_finite() && g.is_finite());
        // and from the other side the loss is linear, not infinite
        let (v2, g2) = logistic_component(&a, -1.0, &x);
        assert!((v2 - 1000.0).abs() < 1e-12);
        assert!(g2.is_finite());
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(31);
        for _ in 0..100 {
            let a = Vector::from_vec((0..4).map(|_| rng.range_f64(-2.0, 2.0)).collect());
            let b = if rng.next_f64() < 0.5 { 1.0 } else { -1.0 };
            let x = Vector::from_vec((0..4).map(|_| rng.range_f64(-2.0, 2.0)).collect());
            let (_, g) = logistic_component(&a, b, &x);
            let h = 1e-6;
            for i in 0..4 {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let (vp, _) = logistic_component(&a, b, &xp);
                let (vm, _) = logistic_component(&a, b, &xm);
                let fd = (vp - vm) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6, "fd {fd} vs grad {}", g[i]);
            }
        }
    }

    #[test]
    fn shrink_definition_cases() {
        let v = Vector::from_slice(&[0.5, 2.0, -3.0]);
        let s = soft_shrink(1.0, &v).unwrap();
        assert_eq!(s.as_slice(), &[0.0, 1.0, -2.0]);
        let s = soft_shrink(0.0, &v).unwrap();
        assert_eq!(s.as_slice(), v.as_slice());
        assert!(soft_shrink(-0.1, &v).is_err());
    }

    #[test]
    fn shrink_matches_grid_search() {
        // independent oracle: brute-force the 1-d minimization of
        // κ|y| + ½(y - v)² on a fine grid
        let mut rng = SeededRng::new(77);
        for _ in 0..100 {
            let kappa = rng.range_f64(0.0, 3.0);
            let v = rng.range_f64(-5.0, 5.0);
            let shrunk = soft_shrink(kappa, &Vector::from_slice(&[v])).unwrap()[0];
            let lo = v - kappa - 1.0;
            let hi = v + kappa + 1.0;
            let steps = 40_000;
            let mut best = f64::INFINITY;
            let mut arg = 0.0;
            for k in 0..=steps {
                let y = lo + (hi - lo) * (k as f64) / (steps as f64);
                let obj = kappa * y.abs() + 0.5 * (y - v) * (y - v);
                if obj < best {
                    best = obj;
                    arg = y;
                }
            }
            let grid_step = (hi - lo) / steps as f64;
            assert!(
                (shrunk - arg).abs() <= grid_step,
                "shrink {shrunk} vs grid {arg} (κ={kappa}, v={v})"
            );
        }
    }

    #[test]
    fn prox_nonexpansive() {
        let mut rng = SeededRng::new(13);
        let blocks = [
            NonsmoothBlock::L1 { weight: 0.7 },
            NonsmoothBlock::Quadratic {
                p: DenseMatrix::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]),
                q: Vector::from_slice(&[1.0, -2.0]),
            },
            NonsmoothBlock::Zero,
        ];
        for g in blocks.iter() {
            for _ in 0..200 {
                let gamma = rng.range_f64(0.1, 5.0);
                let u = Vector::from_vec((0..2).map(|_| rng.range_f64(-4.0, 4.0)).collect());
                let v = Vector::from_vec((0..2).map(|_| rng.range_f64(-4.0, 4.0)).collect());
                let pu = g.prox(gamma, &u).unwrap();
                let pv = g.prox(gamma, &v).unwrap();
                assert!(pu.sub(&pv).norm() <= u.sub(&v).norm() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn projections_idempotent_and_members() {
        let mut rng = SeededRng::new(23);
        let sets = [
            FeasibleSet::Whole,
            FeasibleSet::Box {
                lo: Vector::from_slice(&[-1.0, 0.0]),
                hi: Vector::from_slice(&[1.0, 2.0]),
            },
            FeasibleSet::Ball {
                center: Vector::from_slice(&[1.0, 1.0]),
                radius: 0.5,
            },
        ];
        for set in sets.iter() {
            for _ in 0..200 {
                let mut v =
                    Vector::from_vec((0..2).map(|_| rng.range_f64(-5.0, 5.0)).collect());
                set.project(&mut v);
                let mut w = v.clone();
                set.project(&mut w);
                assert!(v.sub(&w).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn fused_lasso_nu_and_shapes() {
        // N=1, a=(2,0) → ν = ‖a‖²/4 = 1
        let features = CsrMatrix::from_rows(2, &[vec![(0, 2.0)]]).unwrap();
        let labels = Vector::from_slice(&[1.0]);
        let graph = CsrMatrix::zeros(0, 2);
        let spec = make_fused_lasso(features, labels, graph, 0.1).unwrap();
        assert!((spec.f.lipschitz_nu() - 1.0).abs() < 1e-15);
        // empty graph: A = I and the problem is plain ℓ₁ logistic regression
        assert_eq!(spec.constraints.a.rows(), 2);
        assert_eq!(spec.constraints.a.cols(), 2);
        assert_eq!(spec.constraints.a.to_dense(), DenseMatrix::identity(2));
        spec.validate().unwrap();
        // constraint residual of (x, Ax) is identically zero
        let x = Vector::from_slice(&[0.3, -0.8]);
        let ax = spec.constraints.a.matvec(&x);
        assert_eq!(spec.constraints.residual(&x, &[ax]).norm(), 0.0);
    }

    #[test]
    fn fused_lasso_rejects_bad_labels() {
        let features = CsrMatrix::from_rows(1, &[vec![(0, 1.0)]]).unwrap();
        let labels = Vector::from_slice(&[2.0]);
        assert!(make_fused_lasso(features, labels, CsrMatrix::zeros(0, 1), 0.1).is_err());
    }

    #[test]
    fn quadratic_components_average_to_full() {
        let mut rng = SeededRng::new(3);
        let p1 = DenseMatrix::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]);
        let q1 = Vector::from_slice(&[0.5, -1.0]);
        let f = QuadraticSum::new(p1, q1, 7, &mut rng).unwrap();
        for _ in 0..20 {
            let x = Vector::from_vec((0..2).map(|_| rng.range_f64(-3.0, 3.0)).collect());
            let avg: f64 = (0..7).map(|j| f.component_value(j, &x)).sum::<f64>() / 7.0;
            assert!((avg - f.full_value(&x)).abs() <= 1e-12 * (1.0 + avg.abs()));
            let mut gavg = Vector::zeros(2);
            for j in 0..7 {
                gavg.axpy(1.0 / 7.0, &f.component_grad(j, &x));
            }
            assert!(gavg.sub(&f.full_grad(&x)).norm_inf() <= 1e-12);
        }
    }

    #[test]
    fn quadratic_single_component_is_exact() {
        let mut rng = SeededRng::new(8);
        let f =
            QuadraticSum::new(DenseMatrix::identity(2), Vector::zeros(2), 1, &mut rng).unwrap();
        let x = Vector::from_slice(&[1.5, -2.0]);
        assert_eq!(
            f.component_grad(0, &x).as_slice(),
            f.full_grad(&x).as_slice()
        );
    }

    #[test]
    fn kkt_one_dimensional_fixture() {
        // min ½x² + ½y² s.t. x + y = 2 → (1, 1, 1), F* = 1
        let one = DenseMatrix::identity(1);
        let (x, y, lambda, f_star) = kkt_reference(
            &one,
            &Vector::zeros(1),
            &one,
            &Vector::zeros(1),
            &Matrix::scaled_identity(1, 1.0),
            &Matrix::scaled_identity(1, 1.0),
            &Vector::from_slice(&[2.0]),
        )
        .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((y[0] - 1.0).abs() < 1e-12);
        assert!((lambda[0] - 1.0).abs() < 1e-12);
        assert!((f_star - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kkt_zero_rhs_consistency() {
        let p1 = DenseMatrix::scaled_identity(1, 2.0);
        let q1 = Vector::from_slice(&[-2.0]);
        let p2 = DenseMatrix::identity(1);
        let q2 = Vector::from_slice(&[1.0]);
        let (x, y, lambda, _) = kkt_reference(
            &p1,
            &q1,
            &p2,
            &q2,
            &Matrix::scaled_identity(1, 1.0),
            &Matrix::scaled_identity(1, 1.0),
            &Vector::zeros(1),
        )
        .unwrap();
        // stationarity: 2x - 2 = λ, y + 1 = λ, feasibility x + y = 0
        assert!((2.0 * x[0] - 2.0 - lambda[0]).abs() < 1e-12);
        assert!((y[0] + 1.0 - lambda[0]).abs() < 1e-12);
        assert!((x[0] + y[0]).abs() < 1e-12);
    }

    #[test]
    fn make_quadratic_rejects_indefinite() {
        let mut rng = SeededRng::new(1);
        let bad = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let err = make_quadratic_test(
            bad,
            Vector::zeros(2),
            DenseMatrix::identity(2),
            Vector::zeros(2),
            Matrix::scaled_identity(2, 1.0),
            Matrix::scaled_identity(2, 1.0),
            Vector::zeros(2),
            3,
            &mut rng,
        );
        assert!(err.is_err());
    }

    #[test]
    fn lipschitz_bound_holds_empirically() {
        // 1000 random pairs: ‖∇f_j(x₁) - ∇f_j(x₂)‖_{H⁻¹} ≤ ν‖x₁ - x₂‖_H
        let mut rng = SeededRng::new(55);
        let rows: Vec<Vec<(usize, f64)>> = (0..20)
            .map(|_| (0..3).map(|c| (c, rng.range_f64(-2.0, 2.0))).collect())
            .collect();
        let features = CsrMatrix::from_rows(3, &rows).unwrap();
        let labels = Vector::from_vec(
            (0..20)
                .map(|_| if rng.next_f64() < 0.5 { 1.0 } else { -1.0 })
                .collect(),
        );
        let h = Vector::from_slice(&[1.0, 2.0, 0.5]);
        let f = LogisticSum::new(features, labels, &h).unwrap();
        let nu = f.lipschitz_nu();
        for _ in 0..1000 {
            let j = rng.uniform_index(20);
            let x1 = Vector::from_vec((0..3).map(|_| rng.range_f64(-3.0, 3.0)).collect());
            let x2 = Vector::from_vec((0..3).map(|_| rng.range_f64(-3.0, 3.0)).collect());
            let dg = f.component_grad(j, &x1).sub(&f.component_grad(j, &x2));
            let lhs = float::sqrt(crate::linalg::diag_inv_norm_sq(&dg, &h));
            let rhs = nu * float::sqrt(crate::linalg::diag_norm_sq(&x1.sub(&x2), &h));
            assert!(lhs <= rhs * (1.0 + 1e-10), "lhs {lhs} rhs {rhs}");
        }
    }

    #[test]
    fn descent_lemma_consequence() {
        // f(x₁) ≤ f(x₂) + ⟨∇f(x₂), x₁-x₂⟩ + (ν/2)‖x₁-x₂‖²_H
        let mut rng = SeededRng::new(66);
        let rows: Vec<Vec<(usize, f64)>> = (0..10)
            .map(|_| (0..2).map(|c| (c, rng.range_f64(-1.5, 1.5))).collect())
            .collect();
        let features = CsrMatrix::from_rows(2, &rows).unwrap();
        let labels = Vector::from_vec(
            (0..10)
                .map(|_| if rng.next_f64() < 0.5 { 1.0 } else { -1.0 })
                .collect(),
        );
        let h = Vector::from_slice(&[1.0, 1.0]);
        let f = LogisticSum::new(features, labels, &h).unwrap();
        let nu = f.lipschitz_nu();
        for _ in 0..500 {
            let x1 = Vector::from_vec((0..2).map(|_| rng.range_f64(-3.0, 3.0)).collect());
            let x2 = Vector::from_vec((0..2).map(|_| rng.range_f64(-3.0, 3.0)).collect());
            let d = x1.sub(&x2);
            let bound = f.full_value(&x2)
                + f.full_grad(&x2).dot(&d)
                + 0.5 * nu * crate::linalg::diag_norm_sq(&d, &h);
            assert!(f.full_value(&x1) <= bound * (1.0 + 1e-12) + 1e-12);
        }
    }
}
