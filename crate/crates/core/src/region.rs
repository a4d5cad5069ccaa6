//! Dual-stepsize pairs and the convergence regions they may live in.

use crate::error::{Error, Result};
use crate::float;

/// A dual stepsize pair `(τ, s)`. Construction does not constrain the
/// values; region membership is queried, not enforced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepsizePair {
    pub tau: f64,
    pub s: f64,
}

impl StepsizePair {
    pub fn new(tau: f64, s: f64) -> Self {
        StepsizePair { tau, s }
    }
}

/// The three nested stepsize regions, from the historic one to the largest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionId {
    /// `s ∈ (0, (1+√5)/2)`, `τ+s > 0`, `τ ∈ (-1, 1)`, `|τ| < 1 + s - s²`.
    Delta0,
    /// `τ+s > 0`, `τ ≤ 1`, strict positivity of the region polynomial.
    Delta1,
    /// `τ+s > 0`, `τ ≤ 1`, region polynomial `≥ 0` (closed boundary).
    Delta,
}

/// The region polynomial `-τ² - s² - τs + τ + s + 1`.
///
/// Left-to-right evaluation order is load-bearing: it makes the boundary
/// point `(0, (1+√5)/2)` evaluate to exactly `0.0` in f64, so the closed
/// region keeps its boundary under floating point.
pub fn region_poly(p: StepsizePair) -> f64 {
    let (t, s) = (p.tau, p.s);
    -t * t - s * s - t * s + t + s + 1.0
}

/// Exact evaluation of the defining inequalities; no epsilon slack. Callers
/// wanting slack should shrink `(τ, s)` themselves.
pub fn in_region(p: StepsizePair, r: RegionId) -> bool {
    let (t, s) = (p.tau, p.s);
    if !(t.is_finite() && s.is_finite()) {
        return false;
    }
    match r {
        RegionId::Delta => t + s > 0.0 && t <= 1.0 && region_poly(p) >= 0.0,
        RegionId::Delta1 => t + s > 0.0 && t <= 1.0 && region_poly(p) > 0.0,
        RegionId::Delta0 => {
            let golden = (1.0 + float::sqrt(5.0)) / 2.0;
            s > 0.0
                && s < golden
                && t + s > 0.0
                && t > -1.0
                && t < 1.0
                && float::abs(t) < 1.0 + s - s * s
        }
    }
}

/// Coefficients `(ω₀, ω₁, ω₂)` of the lower bound on the `G̃`-seminorm of the
/// iterate gap:
///
/// `ω₀ = (2 - τ - s - (1-s)²/(1+τ))·β`, `ω₁ = (1-s)²/(1+τ)·β`,
/// `ω₂ = (1-τ)/(1+τ)`.
///
/// `ω₀` is computed through the identity `ω₀ = β·poly(τ,s)/(1+τ)` so that its
/// sign agrees exactly with the region polynomial: membership in the closed
/// region implies all three coefficients are nonnegative, with no rounding
/// gap at the boundary.
pub fn omega_coeffs(p: StepsizePair, beta: f64) -> Result<(f64, f64, f64)> {
    if beta <= 0.0 {
        return Err(Error::InvalidParam(alloc::format!(
            "beta must be positive, got {beta}"
        )));
    }
    let one_tau = 1.0 + p.tau;
    if one_tau <= 0.0 {
        return Err(Error::InvalidParam(alloc::format!(
            "omega coefficients need 1 + tau > 0, got tau = {}",
            p.tau
        )));
    }
    let omega0 = beta * region_poly(p) / one_tau;
    let oms = 1.0 - p.s;
    let omega1 = beta * oms * oms / one_tau;
    let omega2 = (1.0 - p.tau) / one_tau;
    Ok((omega0, omega1, omega2))
}
