//! Outer solver loops: the two-block symmetric method with twice-updated
//! multipliers, the single-block augmented-Lagrangian variant, and the
//! Gauss-Seidel and partially-Jacobi multi-block extensions, all sharing the
//! accelerated stochastic inner routine, budget-based stopping and ergodic
//! averaging.

use crate::error::{Error, Result};
use crate::inner::{
    adaptive_rho, schedule, xsub, EstimatorKind, GradientEstimator, ScheduleParams,
};
use crate::linalg::{psd_certify, spectral_norm_est};
use crate::matrix::{DenseMatrix, Matrix};
use crate::metrics::{compute_metrics, MetricMode, MetricRow};
use crate::problem::ProblemSpec;
use crate::region::{in_region, RegionId, StepsizePair};
use crate::rng::SeededRng;
use crate::vector::Vector;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// Stopping budget. Gradient budgets count component-gradient evaluations,
/// which makes cross-estimator comparisons machine-independent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    Iters(u64),
    Seconds(f64),
    GradEvals(u64),
}

/// Proximal strategy for the nonsmooth subproblems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LMode {
    /// `L = 0`: solve the subproblem exactly (requires `BᵀB` to be a
    /// nonnegative multiple of the identity).
    Zero,
    /// `L = γI - βBᵀB ⪰ 0` with `γ = 1.01·β·λ̂max(BᵀB)`: one prox of `g` at
    /// a linearized point.
    Linearized,
}

/// How the inner proximal weight `M_k = ρ_k·I` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MkMode {
    /// Constant `ρ = 1.01·β·λ̂max(AᵀA)`; keeps `M_k - βAᵀA ⪰ 0` and the
    /// monotonicity of `D_k` trivially.
    Strict,
    /// `ρ_k = max{ρ_min, β·δ₂/δ₁}` from the last two iterates, with the
    /// safeguard floor doubling after ten consecutive residual increases.
    /// Heuristic: the monotone-`D_k` guarantee is forfeited and flagged in
    /// the run record.
    Adaptive,
    /// Caller-pinned constant weight; certified against `βAᵀA` at start.
    Fixed(f64),
}

/// Which outer loop to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    SasAdmm,
    AsAlm,
    GaussSeidel3,
    PartiallyJacobi,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub beta: f64,
    pub pair: StepsizePair,
    pub l_mode: LMode,
    pub schedule: ScheduleParams,
    pub mk_mode: MkMode,
    pub estimator: EstimatorKind,
    pub max_outer: u64,
    pub budget: Budget,
    /// Fraction of the budget after which reporting switches to the running
    /// ergodic average.
    pub ergodic_start_fraction: f64,
    pub seed: u64,
    /// Emit a metric row every this many outer iterations.
    pub report_every: u64,
    /// Safeguard floor for the adaptive proximal weight.
    pub rho_min: f64,
    /// Per-block proximal weights `σᵢ` for the partially-Jacobi method;
    /// `None` picks the smallest certified values.
    pub pj_sigmas: Option<Vec<f64>>,
}

impl SolverConfig {
    pub fn new(beta: f64, pair: StepsizePair, schedule: ScheduleParams, budget: Budget) -> Self {
        SolverConfig {
            beta,
            pair,
            l_mode: LMode::Zero,
            schedule,
            mk_mode: MkMode::Strict,
            estimator: EstimatorKind::Plain,
            max_outer: 1_000_000,
            budget,
            ergodic_start_fraction: 1.0 / 3.0,
            seed: 0,
            report_every: 1,
            rho_min: 1e-8,
            pj_sigmas: None,
        }
    }
}

/// Running sums of the predicted iterates `w̃ᵏ = (xᵏ⁺¹, yᵏ⁺¹, λ̃ᵏ)`.
#[derive(Clone, Debug)]
pub struct ErgodicAccumulator {
    pub sum_x: Vector,
    pub sum_blocks: Vec<Vector>,
    pub sum_lambda_tilde: Vector,
    pub count: u64,
}

impl ErgodicAccumulator {
    fn new(x_dim: usize, block_dims: &[usize], dual_dim: usize) -> Self {
        ErgodicAccumulator {
            sum_x: Vector::zeros(x_dim),
            sum_blocks: block_dims.iter().map(|d| Vector::zeros(*d)).collect(),
            sum_lambda_tilde: Vector::zeros(dual_dim),
            count: 0,
        }
    }

    pub fn average(&self) -> Option<(Vector, Vec<Vector>, Vector)> {
        if self.count == 0 {
            return None;
        }
        let c = 1.0 / self.count as f64;
        Some((
            self.sum_x.scaled(c),
            self.sum_blocks.iter().map(|v| v.scaled(c)).collect(),
            self.sum_lambda_tilde.scaled(c),
        ))
    }
}

/// Full per-iteration solver state.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub x: Vector,
    pub xbreve: Vector,
    pub blocks: Vec<Vector>,
    pub lambda: Vector,
    /// Intermediate multiplier after the first (τ) dual update.
    pub lambda_half: Vector,
    /// Predicted multiplier `λ̃ᵏ`, the quantity entering the ergodic average.
    pub lambda_tilde: Vector,
    pub prev_x: Vector,
    pub iter: u64,
    pub grad_evals: u64,
    /// Current inner proximal weight `ρ_k`.
    pub rho: f64,
    rho_min_cur: f64,
    prev_residual: f64,
    residual_up_streak: u32,
    pub ergodic: ErgodicAccumulator,
}

enum BlockStrategy {
    /// `Bᵢ = 0` and `gᵢ ≡ 0`: the subproblem is constant, keep the iterate.
    Frozen,
    /// `BᵢᵀBᵢ = c·I`: exact minimizer through one prox with the combined
    /// quadratic weight.
    Exact { c: f64 },
    /// One prox of `gᵢ` at the linearized point with weight `gamma`.
    Linearized { gamma: f64 },
}

/// One solver instance: problem reference, validated configuration,
/// precomputed per-block strategies and the evolving state. Single-threaded;
/// owns its random stream.
pub struct Engine<'a> {
    problem: &'a ProblemSpec,
    cfg: SolverConfig,
    method: Method,
    rng: SeededRng,
    est: GradientEstimator,
    state: SolverState,
    rho_strict: f64,
    strategies: Vec<BlockStrategy>,
    pj_sigma: Vec<f64>,
    adaptive_flag: bool,
}

// fixed internal seed for run-start spectral estimates, so the certified
// constants do not depend on the user's stream
const VALIDATE_SEED: u64 = 0xA11CE;

fn lambda_max_sq(m: &Matrix) -> Result<f64> {
    let mut rng = SeededRng::new(VALIDATE_SEED);
    let est = spectral_norm_est(m, 1e-9, 20_000, &mut rng)?;
    Ok(est.value * est.value)
}

impl<'a> Engine<'a> {
    pub fn new(problem: &'a ProblemSpec, cfg: SolverConfig, method: Method) -> Result<Self> {
        problem.validate()?;
        if cfg.beta <= 0.0 {
            return Err(Error::Config(format!("beta must be positive")));
        }
        if !(cfg.ergodic_start_fraction > 0.0 && cfg.ergodic_start_fraction < 1.0) {
            return Err(Error::Config(format!(
                "ergodic start fraction must lie in (0, 1)"
            )));
        }
        if cfg.report_every == 0 {
            return Err(Error::Config(format!("report cadence must be positive")));
        }
        match cfg.budget {
            Budget::Iters(0) | Budget::GradEvals(0) => {}
            Budget::Seconds(s) if s < 0.0 => {
                return Err(Error::Config(format!("negative time budget")));
            }
            _ => {}
        }
        let nu = problem.f.lipschitz_nu();
        if cfg.schedule.c2 > 0.5 / nu * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "schedule c2 = {} exceeds 1/(2nu) = {} for this problem",
                cfg.schedule.c2,
                0.5 / nu
            )));
        }

        let n_blocks = problem.constraints.blocks.len();
        match method {
            Method::SasAdmm => {
                if n_blocks != 1 {
                    return Err(Error::Config(format!(
                        "two-block method needs exactly one nonsmooth block, got {n_blocks}"
                    )));
                }
                if !in_region(cfg.pair, RegionId::Delta) {
                    return Err(Error::Config(format!(
                        "stepsizes ({}, {}) violate the dual-stepsize region: need tau+s > 0, \
                         tau <= 1 and -tau^2 - s^2 - tau*s + tau + s + 1 >= 0",
                        cfg.pair.tau, cfg.pair.s
                    )));
                }
            }
            Method::AsAlm => {
                if n_blocks != 0 {
                    return Err(Error::Config(format!(
                        "augmented-Lagrangian variant takes no nonsmooth blocks, got {n_blocks}"
                    )));
                }
                if !(cfg.pair.s > 0.0 && cfg.pair.s <= 2.0) {
                    return Err(Error::Config(format!(
                        "dual stepsize s = {} outside (0, 2]",
                        cfg.pair.s
                    )));
                }
            }
            Method::GaussSeidel3 => {
                if n_blocks != 2 {
                    return Err(Error::Config(format!(
                        "Gauss-Seidel three-block method needs two nonsmooth blocks, got {n_blocks}"
                    )));
                }
                if !in_region(cfg.pair, RegionId::Delta) {
                    return Err(Error::Config(format!(
                        "stepsizes ({}, {}) violate the dual-stepsize region",
                        cfg.pair.tau, cfg.pair.s
                    )));
                }
                // the ordering z → x → y → λ is only valid when CᵀA = 0
                let c = &problem.constraints.blocks[1];
                let a = &problem.constraints.a;
                let cta = c.to_dense().transpose().matmul(&a.to_dense());
                let scale = c.max_abs() * a.max_abs();
                if cta.max_abs() > 1e-12 * scale {
                    return Err(Error::Config(format!(
                        "Gauss-Seidel update requires C^T A = 0; got max|C^T A| = {}",
                        cta.max_abs()
                    )));
                }
            }
            Method::PartiallyJacobi => {
                if n_blocks == 0 {
                    return Err(Error::Config(format!(
                        "partially-Jacobi method needs at least one nonsmooth block"
                    )));
                }
                if !in_region(cfg.pair, RegionId::Delta) {
                    return Err(Error::Config(format!(
                        "stepsizes ({}, {}) violate the dual-stepsize region",
                        cfg.pair.tau, cfg.pair.s
                    )));
                }
            }
        }

        // per-block subproblem strategies
        let mut strategies = Vec::with_capacity(n_blocks);
        for (i, bmat) in problem.constraints.blocks.iter().enumerate() {
            let g = &problem.nonsmooth[i];
            let set = &problem.block_sets[i];
            if !set.is_whole() && !g.is_zero() {
                return Err(Error::Unsupported(format!(
                    "block {i}: prox over a constrained set with a nonzero objective"
                )));
            }
            let strat = if bmat.is_zero() && g.is_zero() {
                BlockStrategy::Frozen
            } else if let Some(cb) = bmat.as_scaled_identity() {
                // the z-block of the Gauss-Seidel variant and every block of
                // the partially-Jacobi variant demand the exact path; the
                // y-block honors the configured mode
                let use_exact = match (method, i) {
                    (Method::GaussSeidel3, 1) => true,
                    (Method::PartiallyJacobi, _) => true,
                    _ => cfg.l_mode == LMode::Zero,
                };
                if use_exact {
                    BlockStrategy::Exact { c: cb * cb }
                } else {
                    let gamma = 1.01 * cfg.beta * cb * cb;
                    BlockStrategy::Linearized { gamma }
                }
            } else {
                match (method, cfg.l_mode) {
                    (Method::PartiallyJacobi, _) => {
                        return Err(Error::Unsupported(format!(
                            "partially-Jacobi block {i}: B_i^T B_i must be a multiple of the \
                             identity for the scalar-metric prox"
                        )));
                    }
                    (Method::GaussSeidel3, _) if i == 1 => {
                        let gamma = 1.01 * cfg.beta * lambda_max_sq(bmat)?;
                        BlockStrategy::Linearized { gamma }
                    }
                    (_, LMode::Zero) => {
                        return Err(Error::Config(format!(
                            "L-mode zero needs an exact subproblem, but block {i} has a general \
                             coupling matrix; use the linearized mode"
                        )));
                    }
                    (_, LMode::Linearized) => {
                        let gamma = 1.01 * cfg.beta * lambda_max_sq(bmat)?;
                        BlockStrategy::Linearized { gamma }
                    }
                }
            };
            strategies.push(strat);
        }

        // partially-Jacobi proximal weights: σᵢ ≥ 1.01·(q_eff - 1)·β·λmax(BᵢᵀBᵢ),
        // where q_eff counts the blocks that actually couple (Bᵢ ≠ 0)
        let mut pj_sigma = Vec::new();
        if method == Method::PartiallyJacobi {
            let q_eff = problem
                .constraints
                .blocks
                .iter()
                .filter(|b| !b.is_zero())
                .count();
            let couple = if q_eff > 1 { (q_eff - 1) as f64 } else { 0.0 };
            for (i, strat) in strategies.iter().enumerate() {
                let c = match strat {
                    BlockStrategy::Exact { c } => *c,
                    BlockStrategy::Frozen => 0.0,
                    BlockStrategy::Linearized { .. } => unreachable!(),
                };
                let required = 1.01 * couple * cfg.beta * c;
                let sigma = match &cfg.pj_sigmas {
                    Some(list) => {
                        let s = *list.get(i).ok_or_else(|| {
                            Error::Config(format!("missing sigma for block {i}"))
                        })?;
                        if s < required * (1.0 - 1e-12) {
                            return Err(Error::Config(format!(
                                "block {i}: sigma = {s} below the certified bound {required}"
                            )));
                        }
                        s
                    }
                    None => required,
                };
                pj_sigma.push(sigma);
            }
        }

        // inner proximal weight certification
        let a_lam = lambda_max_sq(&problem.constraints.a)?;
        let rho_strict = 1.01 * cfg.beta * a_lam;
        if let MkMode::Fixed(rho) = cfg.mk_mode {
            if rho < cfg.beta * a_lam * (1.0 - 1e-9) {
                return Err(Error::Config(format!(
                    "fixed inner weight {rho} below beta*lambda_max(A^T A) = {}",
                    cfg.beta * a_lam
                )));
            }
        }
        // cross-check the strict weight by factorization on small problems
        if matches!(cfg.mk_mode, MkMode::Strict) && problem.x_dim() <= 512 {
            let mut d = problem.constraints.a.gram().scaled(-cfg.beta);
            for i in 0..problem.x_dim() {
                d.add_to(i, i, rho_strict);
            }
            if !psd_certify(&d, 1e-9 * d.max_abs().max(1.0))? {
                return Err(Error::Config(format!(
                    "strict inner weight failed the PSD certificate"
                )));
            }
        }

        let x_dim = problem.x_dim();
        let dual_dim = problem.dual_dim();
        let block_dims = problem.block_dims();
        let rho0 = match cfg.mk_mode {
            MkMode::Strict => rho_strict,
            MkMode::Fixed(r) => r,
            MkMode::Adaptive => cfg.rho_min,
        };
        let state = SolverState {
            x: Vector::zeros(x_dim),
            xbreve: Vector::zeros(x_dim),
            blocks: block_dims.iter().map(|d| Vector::zeros(*d)).collect(),
            lambda: Vector::zeros(dual_dim),
            lambda_half: Vector::zeros(dual_dim),
            lambda_tilde: Vector::zeros(dual_dim),
            prev_x: Vector::zeros(x_dim),
            iter: 0,
            grad_evals: 0,
            rho: rho0,
            rho_min_cur: cfg.rho_min,
            prev_residual: f64::INFINITY,
            residual_up_streak: 0,
            ergodic: ErgodicAccumulator::new(x_dim, &block_dims, dual_dim),
        };
        let est = GradientEstimator::new(cfg.estimator);
        let rng = SeededRng::new(cfg.seed);
        let adaptive_flag = matches!(cfg.mk_mode, MkMode::Adaptive);
        Ok(Engine {
            problem,
            cfg,
            method,
            rng,
            est,
            state,
            rho_strict,
            strategies,
            pj_sigma,
            adaptive_flag,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Certified strict inner weight `1.01·β·λ̂max(AᵀA)`.
    pub fn rho_strict(&self) -> f64 {
        self.rho_strict
    }

    /// Overrides the all-zeros start. Must be called before stepping.
    pub fn set_start(&mut self, x: Vector, blocks: Vec<Vector>, lambda: Vector) -> Result<()> {
        if self.state.iter != 0 {
            return Err(Error::Config(format!("start point set after stepping")));
        }
        if x.len() != self.state.x.len()
            || lambda.len() != self.state.lambda.len()
            || blocks.len() != self.state.blocks.len()
            || blocks
                .iter()
                .zip(self.state.blocks.iter())
                .any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::Config(format!("start point dimensions differ")));
        }
        self.state.xbreve = x.clone();
        self.state.prev_x = x.clone();
        self.state.x = x;
        self.state.blocks = blocks;
        self.state.lambda = lambda;
        Ok(())
    }

    /// Folds the current predicted iterate into the ergodic sums.
    pub fn ergodic_fold(&mut self) {
        let st = &mut self.state;
        st.ergodic.sum_x.axpy(1.0, &st.x);
        for (sum, y) in st.ergodic.sum_blocks.iter_mut().zip(st.blocks.iter()) {
            sum.axpy(1.0, y);
        }
        st.ergodic.sum_lambda_tilde.axpy(1.0, &st.lambda_tilde);
        st.ergodic.count += 1;
    }

    fn pick_rho(&mut self) -> f64 {
        match self.cfg.mk_mode {
            MkMode::Strict => self.rho_strict,
            MkMode::Fixed(r) => r,
            MkMode::Adaptive => {
                if self.state.iter == 0 {
                    self.state.rho_min_cur
                } else {
                    adaptive_rho(
                        &self.state.prev_x,
                        &self.state.x,
                        &self.problem.constraints.a,
                        self.cfg.beta,
                        self.state.rho_min_cur,
                        self.state.rho,
                    )
                }
            }
        }
    }

    /// The safeguard of the adaptive weight: ten consecutive increases of
    /// the primal residual double the floor.
    fn track_residual(&mut self, r_norm: f64) {
        if !self.adaptive_flag {
            return;
        }
        if r_norm > self.state.prev_residual {
            self.state.residual_up_streak += 1;
            if self.state.residual_up_streak >= 10 {
                self.state.rho_min_cur *= 2.0;
                self.state.residual_up_streak = 0;
            }
        } else {
            self.state.residual_up_streak = 0;
        }
        self.state.prev_residual = r_norm;
    }

    /// Minimizes `gᵢ(y) + (β/2)‖Bᵢy + base‖² + (σ/2)‖y - y_old‖²` over the
    /// block's set. `base` excludes the `Bᵢy` term.
    fn solve_block(&self, i: usize, base: &Vector, y_old: &Vector, sigma: f64) -> Result<Vector> {
        let g = &self.problem.nonsmooth[i];
        let bmat = &self.problem.constraints.blocks[i];
        let beta = self.cfg.beta;
        match &self.strategies[i] {
            BlockStrategy::Frozen => Ok(y_old.clone()),
            BlockStrategy::Exact { c } => {
                let gamma = beta * c + sigma;
                let mut v = bmat.matvec_t(base).scaled(-beta);
                v.axpy(sigma, y_old);
                v.scale(1.0 / gamma);
                let mut y = g.prox(gamma, &v)?;
                self.problem.block_sets[i].project(&mut y);
                Ok(y)
            }
            BlockStrategy::Linearized { gamma } => {
                let mut r = bmat.matvec(y_old);
                r.axpy(1.0, base);
                let mut yc = y_old.clone();
                yc.axpy(-beta / gamma, &bmat.matvec_t(&r));
                let mut y = g.prox(*gamma, &yc)?;
                self.problem.block_sets[i].project(&mut y);
                Ok(y)
            }
        }
    }

    /// Runs the inner accelerated sweep from the current anchor.
    fn run_xsub(&mut self, h: &Vector, m_k: usize, eta_k: f64, rho_k: f64) -> Result<(Vector, Vector)> {
        if self.cfg.estimator == EstimatorKind::Svrg {
            self.state.grad_evals += self
                .est
                .refresh_snapshot(self.problem.f.as_ref(), &self.state.x);
        }
        let (x_new, xb_new, cost) = xsub(
            &self.state.x,
            &self.state.xbreve,
            h,
            m_k,
            eta_k,
            &self.problem.h_diag,
            rho_k,
            &self.est,
            self.problem.f.as_ref(),
            &self.problem.x_set,
            &mut self.rng,
        )?;
        self.state.grad_evals += cost;
        Ok((x_new, xb_new))
    }

    /// One outer iteration of the configured method.
    pub fn step(&mut self) -> Result<()> {
        let (m_k, eta_k) = schedule(self.state.iter, &self.cfg.schedule);
        let rho_k = self.pick_rho();
        self.state.rho = rho_k;
        match self.method {
            Method::SasAdmm => self.step_two_block(m_k, eta_k, rho_k),
            Method::AsAlm => self.step_alm(m_k, eta_k, rho_k),
            Method::GaussSeidel3 => self.step_gauss_seidel(m_k, eta_k, rho_k),
            Method::PartiallyJacobi => self.step_jacobi(m_k, eta_k, rho_k),
        }
    }

    fn commit_x(&mut self, x_new: Vector, xb_new: Vector) {
        self.state.prev_x = core::mem::replace(&mut self.state.x, x_new);
        self.state.xbreve = xb_new;
    }

    fn step_two_block(&mut self, m_k: usize, eta_k: f64, rho_k: f64) -> Result<()> {
        let cons = &self.problem.constraints;
        let (beta, tau, s) = (self.cfg.beta, self.cfg.pair.tau, self.cfg.pair.s);

        // hᵏ = -Aᵀ[λᵏ - β(Axᵏ + Byᵏ - b)]
        let r_k = cons.residual(&self.state.x, &self.state.blocks);
        let mut lam_r = self.state.lambda.clone();
        lam_r.axpy(-beta, &r_k);
        let h = cons.a.matvec_t(&lam_r).scaled(-1.0);

        let (x_new, xb_new) = self.run_xsub(&h, m_k, eta_k, rho_k)?;

        // first dual update and the predicted multiplier, both from the
        // pre-y residual Axᵏ⁺¹ + Byᵏ - b
        let mut r_half = cons.a.matvec(&x_new);
        r_half.axpy(1.0, &cons.blocks[0].matvec(&self.state.blocks[0]));
        r_half.axpy(-1.0, &cons.b);
        let mut lambda_half = self.state.lambda.clone();
        lambda_half.axpy(-tau * beta, &r_half);
        let mut lambda_tilde = self.state.lambda.clone();
        lambda_tilde.axpy(-beta, &r_half);

        // y-subproblem at the half-updated multiplier
        let mut base = cons.a.matvec(&x_new);
        base.axpy(-1.0, &cons.b);
        base.axpy(-1.0 / beta, &lambda_half);
        let y_new = self.solve_block(0, &base, &self.state.blocks[0].clone(), 0.0)?;

        // second dual update from the full residual
        let mut r_full = cons.a.matvec(&x_new);
        r_full.axpy(1.0, &cons.blocks[0].matvec(&y_new));
        r_full.axpy(-1.0, &cons.b);
        let mut lambda_new = lambda_half.clone();
        lambda_new.axpy(-s * beta, &r_full);

        self.track_residual(r_full.norm());
        self.commit_x(x_new, xb_new);
        self.state.blocks[0] = y_new;
        self.state.lambda = lambda_new;
        self.state.lambda_half = lambda_half;
        self.state.lambda_tilde = lambda_tilde;
        self.state.iter += 1;
        Ok(())
    }

    fn step_alm(&mut self, m_k: usize, eta_k: f64, rho_k: f64) -> Result<()> {
        let cons = &self.problem.constraints;
        let (beta, s) = (self.cfg.beta, self.cfg.pair.s);

        // hᵏ = -Aᵀ[λᵏ - β(Axᵏ - b)]
        let mut r_k = cons.a.matvec(&self.state.x);
        r_k.axpy(-1.0, &cons.b);
        let mut lam_r = self.state.lambda.clone();
        lam_r.axpy(-beta, &r_k);
        let h = cons.a.matvec_t(&lam_r).scaled(-1.0);

        let (x_new, xb_new) = self.run_xsub(&h, m_k, eta_k, rho_k)?;

        let mut r_new = cons.a.matvec(&x_new);
        r_new.axpy(-1.0, &cons.b);
        let mut lambda_tilde = self.state.lambda.clone();
        lambda_tilde.axpy(-beta, &r_new);
        let mut lambda_new = self.state.lambda.clone();
        lambda_new.axpy(-s * beta, &r_new);

        self.track_residual(r_new.norm());
        self.commit_x(x_new, xb_new);
        self.state.lambda_half = self.state.lambda.clone();
        self.state.lambda = lambda_new;
        self.state.lambda_tilde = lambda_tilde;
        self.state.iter += 1;
        Ok(())
    }

    fn step_gauss_seidel(&mut self, m_k: usize, eta_k: f64, rho_k: f64) -> Result<()> {
        let cons = &self.problem.constraints;
        let (beta, tau, s) = (self.cfg.beta, self.cfg.pair.tau, self.cfg.pair.s);
        let bmat = &cons.blocks[0];
        let cmat = &cons.blocks[1];

        // z first, from the fully lagged point:
        // argmin l(z) + (β/2)‖Cz + Axᵏ + Byᵏ - b - λᵏ/β‖²
        let mut base_z = cons.a.matvec(&self.state.x);
        base_z.axpy(1.0, &bmat.matvec(&self.state.blocks[0]));
        base_z.axpy(-1.0, &cons.b);
        base_z.axpy(-1.0 / beta, &self.state.lambda);
        let z_new = self.solve_block(1, &base_z, &self.state.blocks[1].clone(), 0.0)?;

        // hᵏ = -Aᵀ[λᵏ - β(Czᵏ⁺¹ + Axᵏ + Byᵏ - b)]
        let mut r_k = cons.a.matvec(&self.state.x);
        r_k.axpy(1.0, &bmat.matvec(&self.state.blocks[0]));
        r_k.axpy(1.0, &cmat.matvec(&z_new));
        r_k.axpy(-1.0, &cons.b);
        let mut lam_r = self.state.lambda.clone();
        lam_r.axpy(-beta, &r_k);
        let h = cons.a.matvec_t(&lam_r).scaled(-1.0);

        let (x_new, xb_new) = self.run_xsub(&h, m_k, eta_k, rho_k)?;

        // dual half-step and λ̃ from Czᵏ⁺¹ + Axᵏ⁺¹ + Byᵏ - b
        let mut r_half = cons.a.matvec(&x_new);
        r_half.axpy(1.0, &bmat.matvec(&self.state.blocks[0]));
        r_half.axpy(1.0, &cmat.matvec(&z_new));
        r_half.axpy(-1.0, &cons.b);
        let mut lambda_half = self.state.lambda.clone();
        lambda_half.axpy(-tau * beta, &r_half);
        let mut lambda_tilde = self.state.lambda.clone();
        lambda_tilde.axpy(-beta, &r_half);

        // y from the half multiplier with the fresh x and z
        let mut base_y = cons.a.matvec(&x_new);
        base_y.axpy(1.0, &cmat.matvec(&z_new));
        base_y.axpy(-1.0, &cons.b);
        base_y.axpy(-1.0 / beta, &lambda_half);
        let y_new = self.solve_block(0, &base_y, &self.state.blocks[0].clone(), 0.0)?;

        // full dual update with the complete three-block residual
        let mut r_full = cons.a.matvec(&x_new);
        r_full.axpy(1.0, &bmat.matvec(&y_new));
        r_full.axpy(1.0, &cmat.matvec(&z_new));
        r_full.axpy(-1.0, &cons.b);
        let mut lambda_new = lambda_half.clone();
        lambda_new.axpy(-s * beta, &r_full);

        self.track_residual(r_full.norm());
        self.commit_x(x_new, xb_new);
        self.state.blocks[0] = y_new;
        self.state.blocks[1] = z_new;
        self.state.lambda = lambda_new;
        self.state.lambda_half = lambda_half;
        self.state.lambda_tilde = lambda_tilde;
        self.state.iter += 1;
        Ok(())
    }

    fn step_jacobi(&mut self, m_k: usize, eta_k: f64, rho_k: f64) -> Result<()> {
        let cons = &self.problem.constraints;
        let (beta, tau, s) = (self.cfg.beta, self.cfg.pair.tau, self.cfg.pair.s);

        // hᵏ from the full lagged residual
        let r_k = cons.residual(&self.state.x, &self.state.blocks);
        let mut lam_r = self.state.lambda.clone();
        lam_r.axpy(-beta, &r_k);
        let h = cons.a.matvec_t(&lam_r).scaled(-1.0);

        let (x_new, xb_new) = self.run_xsub(&h, m_k, eta_k, rho_k)?;

        // residual with the new x and all old blocks drives both dual
        // predictions and every block update (Jacobi independence)
        let r_half = cons.residual(&x_new, &self.state.blocks);
        let mut lambda_half = self.state.lambda.clone();
        lambda_half.axpy(-tau * beta, &r_half);
        let mut lambda_tilde = self.state.lambda.clone();
        lambda_tilde.axpy(-beta, &r_half);

        // shared linear point: Axᵏ⁺¹ + Σ Bₗyₗᵏ - b - λ^{k+1/2}/β
        let mut r_all = r_half.clone();
        r_all.axpy(-1.0 / beta, &lambda_half);

        let mut new_blocks = Vec::with_capacity(self.state.blocks.len());
        for i in 0..self.state.blocks.len() {
            let y_old = self.state.blocks[i].clone();
            // base excludes this block's own contribution
            let mut base = r_all.clone();
            base.axpy(-1.0, &cons.blocks[i].matvec(&y_old));
            let y = self.solve_block(i, &base, &y_old, self.pj_sigma[i])?;
            new_blocks.push(y);
        }

        let r_full = cons.residual(&x_new, &new_blocks);
        let mut lambda_new = lambda_half.clone();
        lambda_new.axpy(-s * beta, &r_full);

        self.track_residual(r_full.norm());
        self.commit_x(x_new, xb_new);
        self.state.blocks = new_blocks;
        self.state.lambda = lambda_new;
        self.state.lambda_half = lambda_half;
        self.state.lambda_tilde = lambda_tilde;
        self.state.iter += 1;
        Ok(())
    }

    fn make_row(&self, f_star: f64, time_s: f64, ergodic: bool) -> MetricRow {
        if ergodic {
            if let Some((x, ys, _)) = self.state.ergodic.average() {
                return compute_metrics(
                    self.problem,
                    &x,
                    &ys,
                    f_star,
                    self.state.iter,
                    time_s,
                    MetricMode::Ergodic,
                );
            }
        }
        compute_metrics(
            self.problem,
            &self.state.x,
            &self.state.blocks,
            f_star,
            self.state.iter,
            time_s,
            MetricMode::Iterate,
        )
    }

    fn budget_spent(&self, now: f64) -> bool {
        match self.cfg.budget {
            Budget::Iters(n) => self.state.iter >= n,
            Budget::GradEvals(g) => self.state.grad_evals >= g,
            Budget::Seconds(s) => now >= s,
        }
    }

    fn past_ergodic_start(&self, now: f64) -> bool {
        let f = self.cfg.ergodic_start_fraction;
        match self.cfg.budget {
            Budget::Iters(n) => self.state.iter as f64 > f * n as f64,
            Budget::GradEvals(g) => self.state.grad_evals as f64 > f * g as f64,
            Budget::Seconds(s) => now > f * s,
        }
    }

    /// Drives the loop under the budget, emitting metric rows at the
    /// configured cadence: current-iterate rows before the ergodic start,
    /// running-average rows after it. `clock` reports elapsed seconds and is
    /// only consulted for timestamps and time budgets, so iteration- and
    /// gradient-budgeted runs are deterministic for a fixed seed.
    pub fn run(
        mut self,
        f_star: f64,
        clock: &mut dyn FnMut() -> f64,
        mut reporter: Option<&mut dyn FnMut(&MetricRow)>,
    ) -> Result<RunRecord> {
        let mut rows = Vec::new();
        let mut emit = |rows: &mut Vec<MetricRow>, row: MetricRow, rep: &mut Option<&mut dyn FnMut(&MetricRow)>| {
            if let Some(r) = rep.as_mut() {
                r(&row);
            }
            rows.push(row);
        };
        let t0 = clock();
        emit(&mut rows, self.make_row(f_star, t0, false), &mut reporter);
        let mut ergodic_start_iter = None;
        loop {
            let now = clock();
            if self.budget_spent(now) || self.state.iter >= self.cfg.max_outer {
                break;
            }
            self.step()?;
            let now = clock();
            if ergodic_start_iter.is_none() && self.past_ergodic_start(now) {
                ergodic_start_iter = Some(self.state.iter);
            }
            if ergodic_start_iter.is_some() {
                self.ergodic_fold();
            }
            if self.state.iter % self.cfg.report_every == 0 {
                let row = self.make_row(f_star, now, ergodic_start_iter.is_some());
                emit(&mut rows, row, &mut reporter);
            }
        }
        if rows.last().map(|r| r.iter) != Some(self.state.iter) {
            let now = clock();
            let row = self.make_row(f_star, now, ergodic_start_iter.is_some());
            emit(&mut rows, row, &mut reporter);
        }
        let config_echo = self.config_echo(f_star);
        let st = self.state;
        Ok(RunRecord {
            rows,
            final_x: st.x,
            final_blocks: st.blocks,
            final_lambda: st.lambda,
            seed: self.cfg.seed,
            config_echo,
            ergodic_start_iter,
            grad_evals: st.grad_evals,
            adaptive_mk: self.adaptive_flag,
        })
    }

    fn config_echo(&self, f_star: f64) -> String {
        let c = &self.cfg;
        let budget = match c.budget {
            Budget::Iters(n) => format!("budget_iters = {n}"),
            Budget::Seconds(s) => format!("budget_sec = {s}"),
            Budget::GradEvals(g) => format!("budget_grads = {g}"),
        };
        let method = match self.method {
            Method::SasAdmm => "sas-admm",
            Method::AsAlm => "as-alm",
            Method::GaussSeidel3 => "gs3",
            Method::PartiallyJacobi => "pj",
        };
        let estimator = match c.estimator {
            EstimatorKind::Plain => "plain",
            EstimatorKind::Svrg => "svrg",
            EstimatorKind::FullGrad => "full",
        };
        let mk = match c.mk_mode {
            MkMode::Strict => format!("strict"),
            MkMode::Adaptive => format!("adaptive"),
            MkMode::Fixed(r) => format!("fixed({r})"),
        };
        format!(
            "method = {method}\nbeta = {}\ntau = {}\ns = {}\nestimator = {estimator}\n\
             mk_mode = {mk}\n{budget}\nergodic_frac = {}\nseed = {}\n\
             schedule = c1={} c2={} c3={} rho={} m={}\nf_star = {:.17e}",
            c.beta,
            c.pair.tau,
            c.pair.s,
            c.ergodic_start_fraction,
            c.seed,
            c.schedule.c1,
            c.schedule.c2,
            c.schedule.c3,
            c.schedule.rho,
            c.schedule.m,
            f_star
        )
    }
}

/// Everything a finished run leaves behind: the metric rows, the final
/// state, the seed and a flat-text echo of the configuration.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub rows: Vec<MetricRow>,
    pub final_x: Vector,
    pub final_blocks: Vec<Vector>,
    pub final_lambda: Vector,
    pub seed: u64,
    pub config_echo: String,
    pub ergodic_start_iter: Option<u64>,
    pub grad_evals: u64,
    /// True when the heuristic adaptive inner weight was used (no monotone
    /// `D_k` guarantee).
    pub adaptive_mk: bool,
}

/// Builds a solver and runs it under the budget.
pub fn run(
    problem: &ProblemSpec,
    cfg: SolverConfig,
    method: Method,
    f_star: f64,
    clock: &mut dyn FnMut() -> f64,
    reporter: Option<&mut dyn FnMut(&MetricRow)>,
) -> Result<RunRecord> {
    Engine::new(problem, cfg, method)?.run(f_star, clock, reporter)
}

/// Dense `D_k = ρI - βAᵀA` for certification in tests and diagnostics.
pub fn dk_matrix(problem: &ProblemSpec, rho: f64, beta: f64) -> DenseMatrix {
    let mut d = problem.constraints.a.gram().scaled(-beta);
    for i in 0..problem.x_dim() {
        d.add_to(i, i, rho);
    }
    d
}
