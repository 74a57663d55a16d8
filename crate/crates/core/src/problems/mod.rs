//! Problem definitions and their lowering to the common ADMM form
//!
//! ```text
//! minimize f(x) + g(z)  subject to  M x - z = c
//! ```
//!
//! [`GenericProblem`] is what the solver consumes. [`QpProblem`] and
//! [`MlProblem`] build one while keeping their structure available for
//! infeasibility detection and duality-gap stopping.

pub mod ml;
pub mod qp;
pub mod reformulations;

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::operators::{HessianOperator, Identity, LinearOperator, OperatorError, SharedOperator};
use crate::prox::{simplex_project_into, soft_threshold_in_place, BoxError, Hyperrectangle};

pub use ml::{BuiltinLoss, Loss, MlProblem};
pub use qp::QpProblem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("{what}: expected dimension {expected}, got {actual}")]
    DimensionMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("{0} must support the adjoint product")]
    MissingAdjoint(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error(transparent)]
    Box(#[from] BoxError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

pub(crate) fn check_dim(what: &'static str, expected: usize, actual: usize) -> Result<(), ProblemError> {
    if expected != actual {
        return Err(ProblemError::DimensionMismatch { what, expected, actual });
    }
    Ok(())
}

/// Smooth convex term `f`.
pub trait SmoothObjective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient_into(&self, x: &[f64], g: &mut [f64]);

    /// A fresh Hessian operator. The solver calls `update` on it with the
    /// current iterate before every use.
    fn hessian(&self) -> Box<dyn HessianOperator>;

    /// `f` is exactly quadratic, so the second-order model is exact.
    fn is_quadratic(&self) -> bool {
        false
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }
}

/// Convex, possibly nonsmooth, term `g` accessed through its prox.
pub trait Regularizer: Send + Sync {
    /// `g(z)`; `+inf` outside the domain.
    fn value(&self, z: &[f64]) -> f64;

    /// `out = argmin_w g(w) + (rho / 2) ||w - v||^2`. Iterative proxes must
    /// reach accuracy `tol`.
    fn prox_into(&self, v: &[f64], rho: f64, tol: f64, out: &mut [f64]);
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type IntoFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type HessFactory = dyn Fn() -> Box<dyn HessianOperator> + Send + Sync;
type ProxFn = dyn Fn(&[f64], f64, f64, &mut [f64]) + Send + Sync;

/// Smooth objective from closures.
pub struct FnObjective {
    dim: usize,
    value: Box<ValueFn>,
    gradient: Box<IntoFn>,
    hessian: Box<HessFactory>,
    quadratic: bool,
}

impl FnObjective {
    pub fn new<V, G, H>(dim: usize, value: V, gradient: G, hessian: H) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        H: Fn() -> Box<dyn HessianOperator> + Send + Sync + 'static,
    {
        FnObjective {
            dim,
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: Box::new(hessian),
            quadratic: false,
        }
    }

    pub fn quadratic(mut self, yes: bool) -> Self {
        self.quadratic = yes;
        self
    }
}

impl SmoothObjective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        (self.gradient)(x, g)
    }
    fn hessian(&self) -> Box<dyn HessianOperator> {
        (self.hessian)()
    }
    fn is_quadratic(&self) -> bool {
        self.quadratic
    }
}

/// Regularizer from closures; the prox closure receives `(v, rho, tol, out)`.
pub struct FnRegularizer {
    value: Box<ValueFn>,
    prox: Box<ProxFn>,
}

impl FnRegularizer {
    pub fn new<V, P>(value: V, prox: P) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        P: Fn(&[f64], f64, f64, &mut [f64]) + Send + Sync + 'static,
    {
        FnRegularizer { value: Box::new(value), prox: Box::new(prox) }
    }
}

impl Regularizer for FnRegularizer {
    fn value(&self, z: &[f64]) -> f64 {
        (self.value)(z)
    }
    fn prox_into(&self, v: &[f64], rho: f64, tol: f64, out: &mut [f64]) {
        (self.prox)(v, rho, tol, out)
    }
}

/// `g = 0`
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroRegularizer;

impl Regularizer for ZeroRegularizer {
    fn value(&self, _z: &[f64]) -> f64 {
        0.0
    }
    fn prox_into(&self, v: &[f64], _rho: f64, _tol: f64, out: &mut [f64]) {
        out.copy_from_slice(v);
    }
}

/// `g = lambda ||z||_1`
#[derive(Debug, Clone, Copy)]
pub struct L1Norm {
    pub lambda: f64,
}

impl Regularizer for L1Norm {
    fn value(&self, z: &[f64]) -> f64 {
        self.lambda * z.iter().map(|v| v.abs()).sum::<f64>()
    }
    fn prox_into(&self, v: &[f64], rho: f64, _tol: f64, out: &mut [f64]) {
        out.copy_from_slice(v);
        soft_threshold_in_place(out, self.lambda / rho);
    }
}

/// Indicator of a hyperrectangle.
#[derive(Debug, Clone)]
pub struct BoxIndicator {
    pub bounds: Hyperrectangle,
}

impl Regularizer for BoxIndicator {
    fn value(&self, z: &[f64]) -> f64 {
        if self.bounds.contains(z, 1e-9) {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn prox_into(&self, v: &[f64], _rho: f64, _tol: f64, out: &mut [f64]) {
        self.bounds.project_into(v, out);
    }
}

/// Indicator of the probability simplex.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimplexIndicator;

impl Regularizer for SimplexIndicator {
    fn value(&self, z: &[f64]) -> f64 {
        let s: f64 = z.iter().sum();
        if (s - 1.0).abs() <= 1e-6 && z.iter().all(|&v| v >= -1e-9) {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn prox_into(&self, v: &[f64], _rho: f64, tol: f64, out: &mut [f64]) {
        simplex_project_into(v, tol, out);
    }
}

/// Data kept from a QP so the solver can run infeasibility detection.
#[derive(Clone)]
pub struct QpData {
    pub p: SharedOperator,
    pub q: Vec<f64>,
    pub bounds: Hyperrectangle,
}

/// Extra structure the solver can exploit.
#[derive(Clone)]
pub enum Structure {
    Generic,
    Qp(QpData),
    Ml(Arc<MlProblem>),
}

type MeasureFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// User stopping rule: stop once `measure(x, z) <= tol`.
#[derive(Clone)]
pub struct CustomConvergence {
    measure: Arc<MeasureFn>,
    pub tol: f64,
}

impl CustomConvergence {
    pub fn new<F>(tol: f64, measure: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        CustomConvergence { measure: Arc::new(measure), tol }
    }

    pub fn measure(&self, x: &[f64], z: &[f64]) -> f64 {
        (self.measure)(x, z)
    }
}

/// `minimize f(x) + g(z)  s.t.  M x - z = c`.
#[derive(Clone)]
pub struct GenericProblem {
    f: Arc<dyn SmoothObjective>,
    g: Arc<dyn Regularizer>,
    m: SharedOperator,
    c: Vec<f64>,
    structure: Structure,
    full_rank: bool,
    convergence: Option<CustomConvergence>,
}

impl GenericProblem {
    pub fn new(
        f: Arc<dyn SmoothObjective>,
        g: Arc<dyn Regularizer>,
        m: SharedOperator,
        c: Vec<f64>,
    ) -> Result<Self, ProblemError> {
        check_dim("constraint operator input", f.dim(), m.input_dim())?;
        check_dim("constraint offset", m.output_dim(), c.len())?;
        if !m.has_adjoint() {
            return Err(ProblemError::MissingAdjoint("constraint operator"));
        }
        if f.dim() == 0 {
            return Err(ProblemError::InvalidParameter("problem dimension must be positive"));
        }
        Ok(GenericProblem { f, g, m, c, structure: Structure::Generic, full_rank: false, convergence: None })
    }

    /// `M = I`, `c = 0`.
    pub fn unconstrained(f: Arc<dyn SmoothObjective>, g: Arc<dyn Regularizer>) -> Result<Self, ProblemError> {
        let n = f.dim();
        Self::new(f, g, Arc::new(Identity::new(n)), vec![0.0; n])
    }

    /// Asserts that `hess f + rho M^T M` is nonsingular so no `sigma`
    /// regularization is needed.
    pub fn with_full_rank_hint(mut self, full_rank: bool) -> Self {
        self.full_rank = full_rank;
        self
    }

    pub fn with_convergence(mut self, rule: CustomConvergence) -> Self {
        self.convergence = Some(rule);
        self
    }

    pub(crate) fn with_structure(mut self, s: Structure) -> Self {
        self.structure = s;
        self
    }

    pub fn n(&self) -> usize {
        self.f.dim()
    }
    pub fn m(&self) -> usize {
        self.c.len()
    }
    pub fn objective(&self) -> &dyn SmoothObjective {
        &*self.f
    }
    pub fn regularizer(&self) -> &dyn Regularizer {
        &*self.g
    }
    pub fn constraint(&self) -> &SharedOperator {
        &self.m
    }
    pub fn offset(&self) -> &[f64] {
        &self.c
    }
    pub fn structure(&self) -> &Structure {
        &self.structure
    }
    pub fn full_rank_hint(&self) -> bool {
        self.full_rank
    }
    pub fn convergence(&self) -> Option<&CustomConvergence> {
        self.convergence.as_ref()
    }

    /// `f(x) + g(z)`
    pub fn objective_value(&self, x: &[f64], z: &[f64]) -> f64 {
        self.f.value(x) + self.g.value(z)
    }
}
