//! Inexact ADMM with preconditioned-CG x-updates.

mod engine;

use alloc::vec::Vec;

use thiserror::Error;

use crate::krylov::CgError;
use crate::linalg::NormKind;
use crate::problems::{GenericProblem, MlProblem, ProblemError, QpProblem};
use crate::sketch::SketchError;

pub use engine::{AdmmSolver, PreconditionerMode, StepOutcome, XSystem};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Offset added to the x-system; forced to zero when the system is known
    /// to be nonsingular.
    pub sigma: f64,
    /// Exponent of the inner tolerance decay.
    pub gamma: f64,
    /// `None` picks `min(50, ceil(n / 20))`.
    pub sketch_rank: Option<usize>,
    pub resketch_every: usize,
    pub norm: NormKind,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_inf: f64,
    /// Over-relaxation, in `(0, 2)`.
    pub alpha: f64,
    pub tau: f64,
    pub mu: f64,
    pub rho0: f64,
    pub adaptive_rho: bool,
    pub penalty_update_every: usize,
    /// No penalty changes after this iteration.
    pub penalty_update_until: usize,
    pub max_iter: usize,
    /// Seconds; only enforced with a real clock.
    pub time_limit: f64,
    pub use_preconditioner: bool,
    pub exact_x_solve: bool,
    /// ML problems: stop on the relative duality gap when the loss has a
    /// conjugate.
    pub use_dual_gap: bool,
    pub eps_dual_gap: f64,
    pub rng_seed: u64,
    /// `None` uses `10 n`.
    pub cg_max_iter: Option<usize>,
    pub infeasibility_window: usize,
    /// Run Lanczos at setup and drop `sigma` if the x-system is certified
    /// nonsingular at the starting point.
    pub certify_sigma: bool,
    /// Inexact proxes get tolerance `prox_tol0 / k^(2 gamma)`.
    pub prox_tol0: f64,
    pub record_history: bool,
    pub x0: Option<Vec<f64>>,
    pub z0: Option<Vec<f64>>,
    pub u0: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            sigma: 1e-6,
            gamma: 1.2,
            sketch_rank: None,
            resketch_every: 20,
            norm: NormKind::L2,
            eps_abs: 1e-4,
            eps_rel: 1e-4,
            eps_inf: 1e-8,
            alpha: 1.6,
            tau: 2.0,
            mu: 10.0,
            rho0: 1.0,
            adaptive_rho: true,
            penalty_update_every: 25,
            penalty_update_until: 1000,
            max_iter: 10_000,
            time_limit: f64::INFINITY,
            use_preconditioner: true,
            exact_x_solve: false,
            use_dual_gap: true,
            eps_dual_gap: 1e-4,
            rng_seed: 0,
            cg_max_iter: None,
            infeasibility_window: 25,
            certify_sigma: false,
            prox_tol0: 1e-8,
            record_history: true,
            x0: None,
            z0: None,
            u0: None,
        }
    }
}

/// `min(50, ceil(n / 20))`, at least one.
pub fn default_sketch_rank(n: usize) -> usize {
    n.div_ceil(20).clamp(1, 50).min(n.max(1))
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |msg: &'static str| Err(SolveError::InvalidOptions(msg));
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be finite and nonnegative");
        }
        if !(self.gamma > 1.0) {
            return bad("gamma must exceed 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return bad("alpha must lie in (0, 2)");
        }
        if !(self.tau > 1.0) || !(self.mu > 1.0) {
            return bad("tau and mu must exceed 1");
        }
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad("rho0 must be positive");
        }
        if !(self.eps_abs >= 0.0 && self.eps_rel >= 0.0 && self.eps_inf > 0.0 && self.eps_dual_gap >= 0.0) {
            return bad("tolerances must be nonnegative");
        }
        if self.penalty_update_every == 0 || self.resketch_every == 0 || self.infeasibility_window == 0 {
            return bad("update intervals must be positive");
        }
        if self.sketch_rank == Some(0) {
            return bad("sketch rank must be positive");
        }
        if !(self.time_limit > 0.0) {
            return bad("time limit must be positive");
        }
        if !(self.prox_tol0 > 0.0) {
            return bad("prox tolerance must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    PrimalAndDualInfeasible,
    IterationLimit,
    TimeLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::PrimalInfeasible => "primal_infeasible",
            SolveStatus::DualInfeasible => "dual_infeasible",
            SolveStatus::PrimalAndDualInfeasible => "primal_and_dual_infeasible",
            SolveStatus::IterationLimit => "iteration_limit",
            SolveStatus::TimeLimit => "time_limit",
        }
    }

    pub fn is_infeasible(self) -> bool {
        matches!(
            self,
            SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible | SolveStatus::PrimalAndDualInfeasible
        )
    }
}

impl core::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub rp: Vec<f64>,
    pub rd: Vec<f64>,
    pub rp_norm: f64,
    pub rd_norm: f64,
    /// Primal and dual thresholds at these iterates.
    pub eps_pri: f64,
    pub eps_dual: f64,
}

/// Iterates and bookkeeping of a running solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub rho: f64,
    /// Completed iterations.
    pub k: usize,
    pub x_prev: Vec<f64>,
    pub u_prev: Vec<f64>,
    /// `M x` at the current `x`.
    pub mx: Vec<f64>,
    /// Over-relaxed `alpha M x + (1 - alpha)(z_prev + c)` of the last step.
    pub w: Vec<f64>,
    /// `grad f(x)` at the current `x`.
    pub grad: Vec<f64>,
    pub x_sum: Vec<f64>,
    pub z_sum: Vec<f64>,
}

impl SolverState {
    pub fn x_avg(&self) -> Vec<f64> {
        average(&self.x_sum, self.k, &self.x)
    }
    pub fn z_avg(&self) -> Vec<f64> {
        average(&self.z_sum, self.k, &self.z)
    }
    /// Unscaled dual `y = rho u`.
    pub fn y(&self) -> Vec<f64> {
        self.u.iter().map(|v| v * self.rho).collect()
    }
}

fn average(sum: &[f64], k: usize, fallback: &[f64]) -> Vec<f64> {
    if k == 0 {
        return fallback.to_vec();
    }
    let s = 1.0 / k as f64;
    sum.iter().map(|v| v * s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IterationRecord {
    pub iter: usize,
    pub rp_norm: f64,
    pub rd_norm: f64,
    pub objective: f64,
    pub rho: f64,
    pub cg_iters: usize,
    /// Duality gap or custom stopping measure, when one is active.
    pub measure: Option<f64>,
    pub linsys_s: f64,
    pub prox_s: f64,
    pub elapsed_s: f64,
}

/// Wall-clock phases in seconds. All zero without a clock.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    /// Setup, including the initial preconditioner.
    pub setup_s: f64,
    /// All sketch and preconditioner builds.
    pub precond_s: f64,
    pub linsys_s: f64,
    pub prox_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Certificates {
    /// Smoothed `delta y`, proving primal infeasibility.
    pub primal: Option<Vec<f64>>,
    /// Smoothed `delta x`, proving dual infeasibility.
    pub dual: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub rp_norm: f64,
    pub rd_norm: f64,
    pub objective: f64,
    pub measure: Option<f64>,
    pub certificates: Certificates,
    pub history: Vec<IterationRecord>,
    pub timings: Timings,
    pub total_cg_iters: usize,
    pub x_avg: Vec<f64>,
    pub z_avg: Vec<f64>,
    pub sigma: f64,
    pub sketch_rank: usize,
    pub preconditioner: PreconditionerMode,
}

/// Snapshot passed to the progress callback after every iteration.
pub struct Progress<'a> {
    pub iter: usize,
    pub rp_norm: f64,
    pub rd_norm: f64,
    pub objective: f64,
    pub rho: f64,
    pub cg_iters: usize,
    pub measure: Option<f64>,
    pub x: &'a [f64],
    pub z: &'a [f64],
    pub u: &'a [f64],
    pub penalty_change: Option<&'a PenaltyChange>,
}

/// Emitted when the penalty changes; `u_old` is the scaled dual before the
/// rescale.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyChange {
    pub rho_old: f64,
    pub rho_new: f64,
    pub u_old: Vec<f64>,
}

/// Monotonic time source in seconds.
pub trait Clock {
    fn now(&self) -> f64;
}

/// Clock that never advances; timings stay zero and time limits never fire.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("invalid solver options: {0}")]
    InvalidOptions(&'static str),
    #[error("{what}: expected length {expected}, got {actual}")]
    DimensionMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("linear solve failed at iteration {iteration}: {source}")]
    LinearSolve { iteration: usize, source: CgError },
    #[error("preconditioner construction failed at iteration {iteration}: {source}")]
    Preconditioner { iteration: usize, source: SketchError },
    #[error("non-finite iterate at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

pub fn solve(problem: &GenericProblem, options: &SolverOptions) -> Result<SolveResult, SolveError> {
    solve_with(problem, options, &NoClock, None)
}

pub fn solve_with(
    problem: &GenericProblem,
    options: &SolverOptions,
    clock: &dyn Clock,
    callback: Option<&mut dyn FnMut(&Progress<'_>)>,
) -> Result<SolveResult, SolveError> {
    let mut solver = AdmmSolver::new(problem, options.clone(), clock)?;
    solver.run(callback)
}

impl QpProblem {
    pub fn solve(&self, options: &SolverOptions) -> Result<SolveResult, SolveError> {
        solve(&self.to_generic(), options)
    }
}

impl MlProblem {
    pub fn solve(&self, options: &SolverOptions) -> Result<SolveResult, SolveError> {
        solve(&self.to_generic(), options)
    }
}
