use alloc::boxed::Box;
use alloc::collections::VecDeque;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    default_sketch_rank, Certificates, Clock, IterationRecord, PenaltyChange, Progress, Residuals, SolveError,
    SolveResult, SolveStatus, SolverOptions, SolverState, Timings,
};
use crate::krylov::{cg_tolerance, default_max_iter, pcg_into, CgReport, TOLERANCE_FLOOR};
use crate::linalg::{all_finite, axpy, dot, norm2};
use crate::operators::{HessianOperator, Identity, LinearOperator};
use crate::problems::{CustomConvergence, GenericProblem, MlProblem, Structure};
use crate::prox::{box_recession_distance, box_support};
use crate::sketch::{estimate_extreme_eigs, nystrom_sketch, NystromPreconditioner};

const PROX_TOL_FLOOR: f64 = 1e-14;
const CERTIFY_LANCZOS_ITERS: usize = 30;
const CERTIFY_MIN_EIG: f64 = 1e-8;

/// How the preconditioner relates to the x-system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreconditionerMode {
    /// Plain CG.
    None,
    /// `M^T M = beta I`: sketch the Hessian curvature once per refresh and
    /// track `rho` through the shift `rho beta + s + sigma`.
    Curvature { beta: f64 },
    /// General `M`: sketch `hess f + rho M^T M` and resketch when `rho`
    /// changes.
    Composite,
}

/// `v -> (hess f + rho M^T M + sigma I) v`, never formed.
pub struct XSystem<'a> {
    h: &'a dyn HessianOperator,
    m: &'a dyn LinearOperator,
    rho: f64,
    sigma: f64,
}

impl LinearOperator for XSystem<'_> {
    fn input_dim(&self) -> usize {
        self.h.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.h.input_dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.h.apply_into(x, y);
        if self.sigma != 0.0 {
            axpy(self.sigma, x, y);
        }
        if self.m.is_identity() {
            axpy(self.rho, x, y);
        } else {
            let mut mx = vec![0.0; self.m.output_dim()];
            self.m.apply_into(x, &mut mx);
            let mut mtmx = vec![0.0; x.len()];
            self.m.apply_adjoint_into(&mx, &mut mtmx).expect("constraint adjoint checked");
            axpy(self.rho, &mtmx, y);
        }
    }
}

struct Curvature<'a>(&'a dyn HessianOperator);

impl LinearOperator for Curvature<'_> {
    fn input_dim(&self) -> usize {
        self.0.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.0.input_dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply_curvature_into(x, y)
    }
}

enum StopRule {
    Residuals,
    DualGap(Arc<MlProblem>, f64),
    Custom(CustomConvergence),
}

struct DeltaWindow {
    width: usize,
    snaps: VecDeque<(Vec<f64>, Vec<f64>)>,
}

impl DeltaWindow {
    fn reset(&mut self) {
        self.snaps.clear();
    }
}

/// Returns `beta` if `M^T M = beta I` on random probes.
fn scaled_orthogonal(m: &dyn LinearOperator, seed: u64) -> Option<f64> {
    if m.is_identity() {
        return Some(1.0);
    }
    let n = m.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut beta: Option<f64> = None;
    let mut mv = vec![0.0; m.output_dim()];
    let mut w = vec![0.0; n];
    for _ in 0..2 {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        m.apply_into(&v, &mut mv);
        m.apply_adjoint_into(&mv, &mut w).ok()?;
        let b = dot(&v, &w) / dot(&v, &v);
        if !(b > 0.0) {
            return None;
        }
        let mut d = w.clone();
        axpy(-b, &v, &mut d);
        if norm2(&d) > 1e-10 * norm2(&w) {
            return None;
        }
        match beta {
            Some(b0) if (b0 - b).abs() > 1e-10 * b0 => return None,
            _ => beta = Some(b),
        }
    }
    beta
}

/// One ADMM solve in progress. [`AdmmSolver::run`] drives it to completion;
/// the individual update methods are public for inspection and testing.
pub struct AdmmSolver<'p> {
    problem: &'p GenericProblem,
    opts: SolverOptions,
    clock: &'p dyn Clock,
    state: SolverState,
    hess: Box<dyn HessianOperator>,
    precond: Option<NystromPreconditioner>,
    mode: PreconditionerMode,
    sigma: f64,
    rank: usize,
    sketches_built: u64,
    needs_resketch: bool,
    stop: StopRule,
    last_rp: f64,
    last_rd: f64,
    window: Option<DeltaWindow>,
    rho_frozen: bool,
    certificates: Certificates,
    timings: Timings,
    history: Vec<IterationRecord>,
    total_cg: usize,
    cg_max: usize,
    start: f64,
}

impl<'p> AdmmSolver<'p> {
    pub fn new(problem: &'p GenericProblem, opts: SolverOptions, clock: &'p dyn Clock) -> Result<Self, SolveError> {
        opts.validate()?;
        let start = clock.now();
        let (n, m) = (problem.n(), problem.m());
        let take = |v: &Option<Vec<f64>>, len: usize, what: &'static str| -> Result<Vec<f64>, SolveError> {
            match v {
                Some(v) if v.len() != len => Err(SolveError::DimensionMismatch { what, expected: len, actual: v.len() }),
                Some(v) => Ok(v.clone()),
                None => Ok(vec![0.0; len]),
            }
        };
        let x = take(&opts.x0, n, "x0")?;
        let z = take(&opts.z0, m, "z0")?;
        let u = take(&opts.u0, m, "u0")?;

        let f = problem.objective();
        let mut hess = f.hessian();
        hess.update(&x);
        let grad = f.gradient(&x);
        let mut mx = vec![0.0; m];
        problem.constraint().apply_into(&x, &mut mx);

        let beta = scaled_orthogonal(&**problem.constraint(), opts.rng_seed ^ 0xa5a5);
        let mode = if !opts.use_preconditioner {
            PreconditionerMode::None
        } else if let Some(beta) = beta {
            PreconditionerMode::Curvature { beta }
        } else {
            PreconditionerMode::Composite
        };

        let mut sigma = opts.sigma;
        if beta.is_some() || problem.full_rank_hint() {
            sigma = 0.0;
        } else if opts.certify_sigma && sigma > 0.0 {
            let sys = XSystem { h: &*hess, m: &**problem.constraint(), rho: opts.rho0, sigma: 0.0 };
            if let Ok((_, lmin)) = estimate_extreme_eigs(&sys, CERTIFY_LANCZOS_ITERS, opts.rng_seed ^ 0x1a2c) {
                if lmin > CERTIFY_MIN_EIG {
                    sigma = 0.0;
                }
            }
        }

        let stop = if let Some(rule) = problem.convergence() {
            StopRule::Custom(rule.clone())
        } else {
            match problem.structure() {
                Structure::Ml(p) if opts.use_dual_gap && p.loss().has_conjugate() => {
                    StopRule::DualGap(p.clone(), opts.eps_dual_gap)
                }
                _ => StopRule::Residuals,
            }
        };
        let window = match problem.structure() {
            Structure::Qp(_) => {
                Some(DeltaWindow { width: opts.infeasibility_window, snaps: VecDeque::new() })
            }
            _ => None,
        };

        let rank = opts.sketch_rank.unwrap_or_else(|| default_sketch_rank(n)).min(n);
        let cg_max = opts.cg_max_iter.unwrap_or_else(|| default_max_iter(n));
        let rho = opts.rho0;
        let state = SolverState {
            x_prev: x.clone(),
            u_prev: u.clone(),
            x_sum: vec![0.0; n],
            z_sum: vec![0.0; m],
            w: mx.clone(),
            x,
            z,
            u,
            rho,
            k: 0,
            mx,
            grad,
        };
        let mut solver = AdmmSolver {
            problem,
            opts,
            clock,
            state,
            hess,
            precond: None,
            mode,
            sigma,
            rank,
            sketches_built: 0,
            needs_resketch: false,
            stop,
            last_rp: 0.0,
            last_rd: 0.0,
            window,
            rho_frozen: false,
            certificates: Certificates::default(),
            timings: Timings::default(),
            history: Vec::new(),
            total_cg: 0,
            cg_max,
            start,
        };
        solver.build_preconditioner(0)?;
        let res = solver.compute_residuals();
        solver.last_rp = res.rp_norm;
        solver.last_rd = res.rd_norm;
        solver.timings.setup_s = clock.now() - start;
        Ok(solver)
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }
    /// Direct access to the iterates, e.g. to stage a specific point.
    pub fn state_mut(&mut self) -> &mut SolverState {
        &mut self.state
    }
    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn mode(&self) -> PreconditionerMode {
        self.mode
    }
    pub fn preconditioner(&self) -> Option<&NystromPreconditioner> {
        self.precond.as_ref()
    }
    pub fn rho_frozen(&self) -> bool {
        self.rho_frozen
    }

    /// Recomputes `grad f` and `M x` after the iterates were edited through
    /// [`AdmmSolver::state_mut`].
    pub fn refresh(&mut self) {
        let s = &mut self.state;
        self.problem.objective().gradient_into(&s.x, &mut s.grad);
        self.problem.constraint().apply_into(&s.x, &mut s.mx);
        self.hess.update(&s.x);
    }

    fn build_preconditioner(&mut self, iteration: usize) -> Result<(), SolveError> {
        let t0 = self.clock.now();
        let seed = self.opts.rng_seed.wrapping_add(self.sketches_built.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let err = |source| SolveError::Preconditioner { iteration, source };
        match self.mode {
            PreconditionerMode::None => {}
            PreconditionerMode::Curvature { beta } => {
                let sk = nystrom_sketch(&Curvature(&*self.hess), self.rank, seed).map_err(err)?;
                let nu = self.curvature_shift(beta);
                self.precond = Some(NystromPreconditioner::new(sk, nu).map_err(err)?);
            }
            PreconditionerMode::Composite => {
                let sys = XSystem { h: &*self.hess, m: &**self.problem.constraint(), rho: self.state.rho, sigma: 0.0 };
                let sk = nystrom_sketch(&sys, self.rank, seed).map_err(err)?;
                let nu = if self.sigma > 0.0 {
                    self.sigma
                } else {
                    1e-8 * sk.eigenvalues().first().copied().unwrap_or(1.0).max(1.0)
                };
                self.precond = Some(NystromPreconditioner::new(sk, nu).map_err(err)?);
            }
        }
        self.sketches_built += 1;
        self.needs_resketch = false;
        self.timings.precond_s += self.clock.now() - t0;
        Ok(())
    }

    fn curvature_shift(&self, beta: f64) -> f64 {
        let nu = self.state.rho * beta + self.hess.identity_shift() + self.sigma;
        if nu > 0.0 {
            nu
        } else {
            f64::MIN_POSITIVE.sqrt()
        }
    }

    /// The x-subproblem operator and right-hand side at the current state:
    /// `(H + rho M^T M + sigma I) x = (H + sigma I) x_k - grad f(x_k) + rho M^T (z + c - u)`.
    pub fn x_system(&self) -> (XSystem<'_>, Vec<f64>) {
        let s = &self.state;
        let n = s.x.len();
        let sys = XSystem { h: &*self.hess, m: &**self.problem.constraint(), rho: s.rho, sigma: self.sigma };
        let mut rhs = vec![0.0; n];
        self.hess.apply_into(&s.x, &mut rhs);
        axpy(self.sigma, &s.x, &mut rhs);
        axpy(-1.0, &s.grad, &mut rhs);
        let t: Vec<f64> = s.z.iter().zip(self.problem.offset()).zip(&s.u).map(|((z, c), u)| z + c - u).collect();
        let mut mt = vec![0.0; n];
        self.problem.constraint().apply_adjoint_into(&t, &mut mt).expect("constraint adjoint checked");
        axpy(s.rho, &mt, &mut rhs);
        (sys, rhs)
    }

    /// Inner tolerance for iteration `k`.
    pub fn inner_tolerance(&self, k: usize) -> f64 {
        if self.opts.exact_x_solve {
            TOLERANCE_FLOOR
        } else {
            cg_tolerance(k, self.last_rp, self.last_rd, self.opts.gamma)
        }
    }

    /// Solves the x-subproblem to relative tolerance `tol`, warm-started at
    /// the current `x`.
    pub fn x_update(&mut self, tol: f64) -> Result<CgReport, SolveError> {
        let iteration = self.state.k + 1;
        let mut x_new = self.state.x.clone();
        let report = {
            let (sys, rhs) = self.x_system();
            let n = x_new.len();
            let res = match &self.precond {
                Some(p) => pcg_into(&sys, &rhs, &mut x_new, p, tol, self.cg_max),
                None => pcg_into(&sys, &rhs, &mut x_new, &Identity::new(n), tol, self.cg_max),
            };
            res.map_err(|source| SolveError::LinearSolve { iteration, source })?
        };
        let s = &mut self.state;
        core::mem::swap(&mut s.x_prev, &mut s.x);
        s.x = x_new;
        self.problem.constraint().apply_into(&s.x, &mut s.mx);
        Ok(report)
    }

    /// Over-relaxed prox step `z = prox_{g/rho}(w - c + u)` with
    /// `w = alpha M x + (1 - alpha)(z + c)`.
    pub fn z_update(&mut self, prox_tol: f64) {
        let a = self.opts.alpha;
        let c = self.problem.offset();
        let s = &mut self.state;
        let mut v = vec![0.0; s.z.len()];
        for i in 0..v.len() {
            s.w[i] = a * s.mx[i] + (1.0 - a) * (s.z[i] + c[i]);
            v[i] = s.w[i] - c[i] + s.u[i];
        }
        self.problem.regularizer().prox_into(&v, s.rho, prox_tol, &mut s.z);
    }

    /// `u = u + w - z - c`.
    pub fn u_update(&mut self) {
        let c = self.problem.offset();
        let s = &mut self.state;
        s.u_prev.copy_from_slice(&s.u);
        for i in 0..s.u.len() {
            s.u[i] += s.w[i] - s.z[i] - c[i];
        }
    }

    /// `rp = M x - z - c`, `rd = grad f(x) + rho M^T u` and the stopping
    /// thresholds.
    pub fn compute_residuals(&self) -> Residuals {
        let s = &self.state;
        let c = self.problem.offset();
        let norm = self.opts.norm;
        let rp: Vec<f64> = s.mx.iter().zip(&s.z).zip(c).map(|((mx, z), c)| mx - z - c).collect();
        let mut mtu = vec![0.0; s.x.len()];
        self.problem.constraint().apply_adjoint_into(&s.u, &mut mtu).expect("constraint adjoint checked");
        crate::linalg::scale(s.rho, &mut mtu);
        let mut rd = s.grad.clone();
        axpy(1.0, &mtu, &mut rd);
        let (m, n) = (s.z.len() as f64, s.x.len() as f64);
        let scale_p = norm.norm(&s.mx).max(norm.norm(&s.z)).max(norm.norm(c));
        let eps_pri = m.sqrt() * self.opts.eps_abs + self.opts.eps_rel * scale_p;
        let eps_dual = n.sqrt() * self.opts.eps_abs + self.opts.eps_rel * norm.norm(&mtu);
        Residuals { rp_norm: norm.norm(&rp), rd_norm: norm.norm(&rd), rp, rd, eps_pri, eps_dual }
    }

    /// Current value of the active non-residual stopping measure.
    pub fn stopping_measure(&self) -> Option<f64> {
        match &self.stop {
            StopRule::Residuals => None,
            StopRule::DualGap(p, _) => Some(p.dual_gap(&self.state.z)),
            StopRule::Custom(rule) => Some(rule.measure(&self.state.x, &self.state.z)),
        }
    }

    pub fn check_termination(&self, res: &Residuals, measure: Option<f64>) -> bool {
        match (&self.stop, measure) {
            (StopRule::DualGap(_, tol), Some(g)) => g <= *tol,
            (StopRule::Custom(rule), Some(v)) => v <= rule.tol,
            _ => res.rp_norm <= res.eps_pri && res.rd_norm <= res.eps_dual,
        }
    }

    /// Residual-balancing penalty rule. Rescales `u` so `rho u` is kept and
    /// moves the preconditioner shift with `rho`.
    pub fn update_penalty(&mut self, res: &Residuals) -> Option<PenaltyChange> {
        let (tau, mu) = (self.opts.tau, self.opts.mu);
        let rho_old = self.state.rho;
        let rho_new = if res.rp_norm > mu * res.rd_norm {
            rho_old * tau
        } else if res.rd_norm > mu * res.rp_norm {
            rho_old / tau
        } else {
            return None;
        };
        let u_old = self.state.u.clone();
        let ratio = rho_old / rho_new;
        crate::linalg::scale(ratio, &mut self.state.u);
        self.state.rho = rho_new;
        match self.mode {
            PreconditionerMode::Curvature { beta } => {
                let nu = self.curvature_shift(beta);
                if let Some(p) = self.precond.as_mut() {
                    p.update_shift(nu).expect("shift is positive");
                }
            }
            PreconditionerMode::Composite => self.needs_resketch = true,
            PreconditionerMode::None => {}
        }
        if let Some(w) = self.window.as_mut() {
            w.reset();
        }
        Some(PenaltyChange { rho_old, rho_new, u_old })
    }

    /// Infeasibility tests on the smoothed iterate differences. Only active
    /// for QPs; freezes `rho` once a test is within a factor of ten.
    pub fn check_infeasibility(&mut self) -> Option<SolveStatus> {
        let data = match self.problem.structure() {
            Structure::Qp(d) => d,
            _ => return None,
        };
        let window = self.window.as_mut()?;
        let s = &self.state;
        window.snaps.push_back((s.x.clone(), s.y()));
        if window.snaps.len() > window.width + 1 {
            window.snaps.pop_front();
        }
        if window.snaps.len() < window.width + 1 {
            return None;
        }
        let inv = 1.0 / window.width as f64;
        let (x0, y0) = window.snaps.front().unwrap();
        let (x1, y1) = window.snaps.back().unwrap();
        let dx: Vec<f64> = x1.iter().zip(x0).map(|(a, b)| (a - b) * inv).collect();
        let dy: Vec<f64> = y1.iter().zip(y0).map(|(a, b)| (a - b) * inv).collect();
        let eps = self.opts.eps_inf;
        let norm = self.opts.norm;
        let m_op = self.problem.constraint();

        let mut primal = false;
        let mut near = false;
        let ny = norm.norm(&dy);
        if ny > 1e-30 {
            let mut mty = vec![0.0; dx.len()];
            m_op.apply_adjoint_into(&dy, &mut mty).expect("constraint adjoint checked");
            let a = norm.norm(&mty) / ny;
            let sup = box_support(&dy, &data.bounds) / ny;
            primal = a < eps && sup < eps;
            near |= a < 10.0 * eps && sup < 10.0 * eps;
        }
        let mut dual = false;
        let nx = norm.norm(&dx);
        if nx > 1e-30 {
            let mut pdx = vec![0.0; dx.len()];
            data.p.apply_into(&dx, &mut pdx);
            let mut mdx = vec![0.0; dy.len()];
            m_op.apply_into(&dx, &mut mdx);
            let a = norm.norm(&pdx) / nx;
            let b = box_recession_distance(&mdx, &data.bounds) / nx;
            let c = dot(&data.q, &dx) / nx;
            dual = a < eps && b < eps && c < -eps;
            near |= a < 10.0 * eps && b < 10.0 * eps && c < -0.1 * eps;
        }
        if near {
            self.rho_frozen = true;
        }
        if primal {
            self.certificates.primal = Some(dy);
        }
        if dual {
            self.certificates.dual = Some(dx);
        }
        match (primal, dual) {
            (true, true) => Some(SolveStatus::PrimalAndDualInfeasible),
            (true, false) => Some(SolveStatus::PrimalInfeasible),
            (false, true) => Some(SolveStatus::DualInfeasible),
            _ => None,
        }
    }

    fn prox_tolerance(&self, k: usize) -> f64 {
        let kf = k as f64;
        (self.opts.prox_tol0 / kf.powf(2.0 * self.opts.gamma)).max(PROX_TOL_FLOOR)
    }

    fn elapsed(&self) -> f64 {
        self.clock.now() - self.start
    }

    /// Runs one iteration. Returns a terminal status if one was reached.
    pub fn step(&mut self) -> Result<StepOutcome, SolveError> {
        let k = self.state.k + 1;
        if k > 1 && !self.hess.is_constant() {
            self.hess.update(&self.state.x);
            if self.mode != PreconditionerMode::None && (k - 1) % self.opts.resketch_every == 0 {
                self.needs_resketch = true;
            }
        }
        if self.needs_resketch {
            self.build_preconditioner(k)?;
        }

        let t0 = self.clock.now();
        let tol = self.inner_tolerance(k);
        let report = self.x_update(tol)?;
        let t1 = self.clock.now();
        self.z_update(self.prox_tolerance(k));
        let t2 = self.clock.now();
        self.u_update();
        self.timings.linsys_s += t1 - t0;
        self.timings.prox_s += t2 - t1;
        self.total_cg += report.iterations;

        let s = &mut self.state;
        s.k = k;
        self.problem.objective().gradient_into(&s.x, &mut s.grad);
        axpy(1.0, &s.x, &mut s.x_sum);
        axpy(1.0, &s.z, &mut s.z_sum);
        if !all_finite(&s.x) || !all_finite(&s.z) || !all_finite(&s.u) {
            return Err(SolveError::NonFinite { iteration: k });
        }

        let res = self.compute_residuals();
        self.last_rp = res.rp_norm;
        self.last_rd = res.rd_norm;
        let measure = self.stopping_measure();
        let objective = self.problem.objective_value(&self.state.x, &self.state.z);

        let mut status = None;
        if self.check_termination(&res, measure) {
            status = Some(SolveStatus::Optimal);
        } else if let Some(st) = self.check_infeasibility() {
            status = Some(st);
        }

        let mut change = None;
        if status.is_none()
            && self.opts.adaptive_rho
            && !self.rho_frozen
            && k % self.opts.penalty_update_every == 0
            && k <= self.opts.penalty_update_until
        {
            change = self.update_penalty(&res);
        }

        if status.is_none() {
            if k >= self.opts.max_iter {
                status = Some(SolveStatus::IterationLimit);
            } else if self.elapsed() > self.opts.time_limit {
                status = Some(SolveStatus::TimeLimit);
            }
        }

        let record = IterationRecord {
            iter: k,
            rp_norm: res.rp_norm,
            rd_norm: res.rd_norm,
            objective,
            rho: self.state.rho,
            cg_iters: report.iterations,
            measure,
            linsys_s: t1 - t0,
            prox_s: t2 - t1,
            elapsed_s: self.elapsed(),
        };
        if self.opts.record_history {
            self.history.push(record);
        }
        Ok(StepOutcome { record, status, penalty_change: change })
    }

    pub fn run(&mut self, mut callback: Option<&mut dyn FnMut(&Progress<'_>)>) -> Result<SolveResult, SolveError> {
        let status = loop {
            let out = self.step()?;
            if let Some(cb) = callback.as_mut() {
                let s = &self.state;
                cb(&Progress {
                    iter: out.record.iter,
                    rp_norm: out.record.rp_norm,
                    rd_norm: out.record.rd_norm,
                    objective: out.record.objective,
                    rho: out.record.rho,
                    cg_iters: out.record.cg_iters,
                    measure: out.record.measure,
                    x: &s.x,
                    z: &s.z,
                    u: &s.u,
                    penalty_change: out.penalty_change.as_ref(),
                });
            }
            if let Some(st) = out.status {
                break st;
            }
        };
        Ok(self.finish(status))
    }

    fn finish(&mut self, status: SolveStatus) -> SolveResult {
        self.timings.total_s = self.elapsed();
        let res = self.compute_residuals();
        let s = &self.state;
        SolveResult {
            status,
            x: s.x.clone(),
            z: s.z.clone(),
            u: s.u.clone(),
            y: s.y(),
            rho: s.rho,
            iterations: s.k,
            rp_norm: res.rp_norm,
            rd_norm: res.rd_norm,
            objective: self.problem.objective_value(&s.x, &s.z),
            measure: self.stopping_measure(),
            certificates: core::mem::take(&mut self.certificates),
            history: core::mem::take(&mut self.history),
            timings: self.timings,
            total_cg_iters: self.total_cg,
            x_avg: s.x_avg(),
            z_avg: s.z_avg(),
            sigma: self.sigma,
            sketch_rank: self.precond.as_ref().map_or(0, |p| p.sketch().rank()),
            preconditioner: self.mode,
        }
    }
}

/// Result of a single [`AdmmSolver::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub record: IterationRecord,
    pub status: Option<SolveStatus>,
    pub penalty_change: Option<PenaltyChange>,
}
