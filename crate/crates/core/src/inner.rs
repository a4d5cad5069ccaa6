//! The accelerated stochastic inner routine that approximately solves the
//! x-subproblem, its gradient estimators, and the `(η_k, m_k)` schedules.

use crate::error::{Error, Result};
use crate::float;
use crate::matrix::Matrix;
use crate::problem::{FeasibleSet, SmoothSum};
use crate::rng::SeededRng;
use crate::vector::Vector;
use alloc::format;
use alloc::vec::Vec;

/// How the stochastic gradient `d_t = ∇f_{ξ}(x̂) + e_t` is formed. All
/// variants are unbiased: `E[d_t] = ∇f(x̂)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    /// `e_t = 0`: plain single-sample gradient.
    Plain,
    /// `e_t = ∇f(x̃) - ∇f_{ξ}(x̃)` with a stored snapshot `x̃`; the control
    /// variate removes variance near the snapshot point.
    Svrg,
    /// Deterministic full gradient; costs `N` component evaluations per use.
    FullGrad,
}

pub struct GradientEstimator {
    kind: EstimatorKind,
    snapshot: Option<(Vector, Vector)>, // (x̃, ∇f(x̃))
}

impl GradientEstimator {
    pub fn new(kind: EstimatorKind) -> Self {
        GradientEstimator {
            kind,
            snapshot: None,
        }
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// Re-anchors the variance-reduction snapshot at `x` and stores the full
    /// gradient there. Returns the component-gradient cost (`N`, or 0 when
    /// the estimator keeps no snapshot).
    pub fn refresh_snapshot(&mut self, f: &dyn SmoothSum, x: &Vector) -> u64 {
        match self.kind {
            EstimatorKind::Svrg => {
                let g = f.full_grad(x);
                self.snapshot = Some((x.clone(), g));
                f.component_count() as u64
            }
            _ => 0,
        }
    }

    /// Draws `ξ` and returns `(d_t, ξ, component-gradient cost)`.
    pub fn estimate(
        &self,
        f: &dyn SmoothSum,
        xhat: &Vector,
        rng: &mut SeededRng,
    ) -> Result<(Vector, usize, u64)> {
        let n = f.component_count();
        match self.kind {
            EstimatorKind::Plain => {
                let xi = rng.uniform_index(n);
                Ok((f.component_grad(xi, xhat), xi, 1))
            }
            EstimatorKind::Svrg => {
                let (snap_x, snap_g) = self.snapshot.as_ref().ok_or_else(|| {
                    Error::Config(format!("svrg estimator used before snapshot refresh"))
                })?;
                let xi = rng.uniform_index(n);
                let mut d = f.component_grad(xi, xhat);
                d.axpy(1.0, snap_g);
                d.axpy(-1.0, &f.component_grad(xi, snap_x));
                Ok((d, xi, 2))
            }
            EstimatorKind::FullGrad => Ok((f.full_grad(xhat), 0, n as u64)),
        }
    }
}

/// Constants of the inner-loop schedules
/// `η_k = min{c₁/(m_k(m_k+1)), c₂}`, `m_k = max{⌈c₃·k^ϱ⌉, m}`.
#[derive(Clone, Copy, Debug)]
pub struct ScheduleParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub rho: f64,
    pub m: usize,
}

impl ScheduleParams {
    /// `c2` is capped against the problem's Lipschitz constant at
    /// construction: `c₂ ≤ 1/(2ν)` keeps every generated `η_k` admissible.
    pub fn new(c1: f64, c2: f64, c3: f64, rho: f64, m: usize, nu: f64) -> Result<Self> {
        if c1 <= 0.0 || c2 <= 0.0 || c3 <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "schedule constants must be positive (c1={c1}, c2={c2}, c3={c3})"
            )));
        }
        if rho < 1.0 {
            return Err(Error::InvalidParam(format!(
                "schedule exponent must be at least 1, got {rho}"
            )));
        }
        if m < 1 {
            return Err(Error::InvalidParam(format!("minimum inner count is 1")));
        }
        if nu <= 0.0 {
            return Err(Error::InvalidParam(format!("nu must be positive, got {nu}")));
        }
        if c2 > 0.5 / nu * (1.0 + 1e-12) {
            return Err(Error::InvalidParam(format!(
                "c2 = {c2} exceeds 1/(2nu) = {} for nu = {nu}",
                0.5 / nu
            )));
        }
        Ok(ScheduleParams { c1, c2, c3, rho, m })
    }

    /// Stock constants for a problem with Lipschitz constant `ν`:
    /// `c₁ = 1/ν`, `c₂ = 1/(2ν)`, `c₃ = 1`, `ϱ = 1.01`, `m = 5`.
    /// `ϱ > 1` selects the `O(1/T)` branch of the expected rate.
    pub fn defaults_for(nu: f64) -> Result<Self> {
        Self::new(1.0 / nu, 0.5 / nu, 1.0, 1.01, 5, nu)
    }
}

/// `(m_k, η_k)` for outer iteration `k`. The product `η_k·m_k(m_k+1)` is
/// nondecreasing in `k` by the min/max structure.
pub fn schedule(k: u64, p: &ScheduleParams) -> (usize, f64) {
    let grown = float::ceil(p.c3 * float::powf(k as f64, p.rho));
    let m_k = if grown.is_finite() && grown > p.m as f64 {
        grown as usize
    } else {
        p.m
    };
    let pair_product = m_k as f64 * (m_k as f64 + 1.0);
    let eta = (p.c1 / pair_product).min(p.c2);
    (m_k, eta)
}

/// One sweep of the accelerated stochastic x-update. Starting from the
/// anchor `x_anchor = xᵏ` and the sliding point `xbreve`, runs `m_k` steps
/// of
///
/// ```text
/// β_t = 2/(t+1),  γ_t = 2/(t·η_k)
/// x̂_t = β_t·x̆_t + (1-β_t)·x_t
/// d_t from the estimator at x̂_t
/// x̆_{t+1} = argmin ⟨d_t + h, x⟩ + (γ_t/2)‖x - x̆_t‖²_H + ½‖x - xᵏ‖²_M over X
/// x_{t+1} = β_t·x̆_{t+1} + (1-β_t)·x_t
/// ```
///
/// with diagonal `H` and `M = ρI`, so the minimizer is the componentwise
/// closed form `(γ_t·h_i·x̆_i + ρ·xᵏ_i - d_i - h_i) / (γ_t·h_i + ρ)`,
/// projected onto `X` when the set is constrained. Returns
/// `(x_{m+1}, x̆_{m+1}, component-gradient cost)`.
#[allow(clippy::too_many_arguments)]
pub fn xsub(
    x_anchor: &Vector,
    xbreve: &Vector,
    h: &Vector,
    m_k: usize,
    eta_k: f64,
    h_diag: &Vector,
    m_rho: f64,
    est: &GradientEstimator,
    f: &dyn SmoothSum,
    x_set: &FeasibleSet,
    rng: &mut SeededRng,
) -> Result<(Vector, Vector, u64)> {
    if m_k == 0 || eta_k <= 0.0 || m_rho < 0.0 {
        return Err(Error::Config(format!(
            "xsub needs m_k ≥ 1, η_k > 0, ρ ≥ 0 (got {m_k}, {eta_k}, {m_rho})"
        )));
    }
    if let FeasibleSet::Ball { .. } = x_set {
        // projection after a componentwise solve is only exact when the
        // combined metric is a scaled identity
        let h0 = h_diag[0];
        if h_diag.iter().any(|v| *v != h0) {
            return Err(Error::Unsupported(format!(
                "ball-constrained x with a non-uniform diagonal metric"
            )));
        }
    }
    let dim = x_anchor.len();
    let mut x_t = x_anchor.clone();
    let mut xb_t = xbreve.clone();
    let mut cost = 0u64;
    for t in 1..=m_k {
        let beta_t = 2.0 / (t as f64 + 1.0);
        let gamma_t = 2.0 / (t as f64 * eta_k);
        let xhat = Vector::convex_comb(beta_t, &xb_t, &x_t);
        let (d, _xi, c) = est.estimate(f, &xhat, rng)?;
        cost += c;
        let mut xb_next = Vector::zeros(dim);
        for i in 0..dim {
            let gh = gamma_t * h_diag[i];
            xb_next[i] = (gh * xb_t[i] + m_rho * x_anchor[i] - d[i] - h[i]) / (gh + m_rho);
        }
        x_set.project(&mut xb_next);
        let x_next = Vector::convex_comb(beta_t, &xb_next, &x_t);
        xb_t = xb_next;
        x_t = x_next;
    }
    Ok((x_t, xb_t, cost))
}

/// The adaptive proximal weight `ρ_k = max{ρ_min, β·δ₂/δ₁}` with
/// `δ₁ = ‖xᵏ - xᵏ⁻¹‖²` and `δ₂ = ‖A(xᵏ - xᵏ⁻¹)‖²`; the ratio underestimates
/// the largest eigenvalue of `AᵀA`. With no movement the previous weight is
/// kept.
pub fn adaptive_rho(
    prev_x: &Vector,
    cur_x: &Vector,
    a: &Matrix,
    beta: f64,
    rho_min: f64,
    prev_rho: f64,
) -> f64 {
    let dx = cur_x.sub(prev_x);
    let delta1 = dx.norm_sq();
    if delta1 == 0.0 {
        return prev_rho;
    }
    let delta2 = a.matvec(&dx).norm_sq();
    rho_min.max(beta * delta2 / delta1)
}

/// Running mean/variance of the estimator error `δ_t = ∇f(x̂) - d_t` at a
/// fixed point, for unbiasedness and variance diagnostics. Nothing is
/// asserted here; the solver's convergence analysis only consumes these
/// numbers as empirical estimates.
#[derive(Clone, Debug)]
pub struct DeltaStats {
    /// Per-coordinate mean of `d_t`.
    pub d_mean: Vector,
    /// Per-coordinate standard deviation of `d_t`.
    pub d_sigma: Vector,
    /// Variance of `‖δ_t‖` across draws.
    pub norm_var: f64,
    pub draws: u64,
}

pub fn delta_stats(
    f: &dyn SmoothSum,
    est: &GradientEstimator,
    xhat: &Vector,
    draws: u64,
    rng: &mut SeededRng,
) -> Result<DeltaStats> {
    let dim = xhat.len();
    let grad = f.full_grad(xhat);
    let mut mean = Vector::zeros(dim);
    let mut m2 = Vector::zeros(dim);
    let mut nmean = 0.0;
    let mut nm2 = 0.0;
    for k in 1..=draws {
        let (d, _, _) = est.estimate(f, xhat, rng)?;
        let delta_norm = grad.sub(&d).norm();
        // Welford updates, coordinatewise and for the error norm
        for i in 0..dim {
            let dlt = d[i] - mean[i];
            mean[i] += dlt / k as f64;
            m2[i] += dlt * (d[i] - mean[i]);
        }
        let dn = delta_norm - nmean;
        nmean += dn / k as f64;
        nm2 += dn * (delta_norm - nmean);
    }
    let denom = (draws.max(2) - 1) as f64;
    let mut sigma = Vector::zeros(dim);
    for i in 0..dim {
        sigma[i] = float::sqrt(m2[i] / denom);
    }
    Ok(DeltaStats {
        d_mean: mean,
        d_sigma: sigma,
        norm_var: nm2 / denom,
        draws,
    })
}

/// Realized inner-loop telescope term in the deterministic case (`δ_t = 0`),
/// where the bound collapses to the `H`-norm difference of the sliding
/// iterate around an arbitrary comparison point.
pub fn zeta_deterministic(
    x_ref: &Vector,
    xbreve_old: &Vector,
    xbreve_new: &Vector,
    h_diag: &Vector,
    eta_k: f64,
    m_k: usize,
) -> f64 {
    let new_gap = crate::linalg::diag_norm_sq(&x_ref.sub(xbreve_new), h_diag);
    let old_gap = crate::linalg::diag_norm_sq(&x_ref.sub(xbreve_old), h_diag);
    2.0 / (m_k as f64 * (m_k as f64 + 1.0)) * (new_gap - old_gap) / eta_k
}
