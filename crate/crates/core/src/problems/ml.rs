//! Regularized empirical risk minimization
//!
//! ```text
//! minimize  sum_i loss(a_i^T x - b_i) + lambda1 ||x||_1 + (lambda2 / 2) ||x||^2
//! ```
//!
//! lowered with `f = loss + ridge`, `g = lambda1 ||.||_1`, `M = I`, `c = 0`.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use super::{check_dim, CustomConvergence, GenericProblem, L1Norm, ProblemError, SmoothObjective, Structure, ZeroRegularizer};
use crate::linalg::{axpy, dot, norm_inf};
use crate::operators::{HessianOperator, LinearOperator, OperatorError, SharedOperator};

/// Scalar convex loss with explicit derivatives.
pub trait Loss: Send + Sync {
    fn value(&self, w: f64) -> f64;
    fn derivative(&self, w: f64) -> f64;
    fn second_derivative(&self, w: f64) -> f64;

    /// `true` for quadratic losses, whose Hessian never changes.
    fn is_quadratic(&self) -> bool {
        false
    }

    /// Constant curvature for the solver's quadratic model of the loss, used
    /// instead of `second_derivative` when that jumps. Must bound
    /// `second_derivative` from above.
    fn model_curvature(&self) -> Option<f64> {
        None
    }

    fn has_conjugate(&self) -> bool {
        false
    }

    /// Convex conjugate; `+inf` outside its domain.
    fn conjugate(&self, _y: f64) -> f64 {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinLoss {
    /// `w^2 / 2`
    Square,
    /// `log(1 + e^w)`
    Logistic,
    /// `w^2` for `|w| <= 1`, `2|w| - 1` otherwise
    Huber,
}

const LOGISTIC_CLAMP: f64 = 1e-12;

fn softplus(w: f64) -> f64 {
    if w > 0.0 {
        w + (-w).exp().ln_1p()
    } else {
        w.exp().ln_1p()
    }
}

fn sigmoid(w: f64) -> f64 {
    if w >= 0.0 {
        1.0 / (1.0 + (-w).exp())
    } else {
        let e = w.exp();
        e / (1.0 + e)
    }
}

impl Loss for BuiltinLoss {
    fn is_quadratic(&self) -> bool {
        matches!(self, BuiltinLoss::Square)
    }
    fn model_curvature(&self) -> Option<f64> {
        match self {
            // the pointwise curvature drops from 2 to 0 at |w| = 1, and
            // Newton-type models built on it can cycle
            BuiltinLoss::Huber => Some(2.0),
            _ => None,
        }
    }
    fn value(&self, w: f64) -> f64 {
        match self {
            BuiltinLoss::Square => 0.5 * w * w,
            BuiltinLoss::Logistic => softplus(w),
            BuiltinLoss::Huber => {
                if w.abs() <= 1.0 {
                    w * w
                } else {
                    2.0 * w.abs() - 1.0
                }
            }
        }
    }

    fn derivative(&self, w: f64) -> f64 {
        match self {
            BuiltinLoss::Square => w,
            BuiltinLoss::Logistic => sigmoid(w),
            BuiltinLoss::Huber => {
                if w.abs() <= 1.0 {
                    2.0 * w
                } else {
                    2.0 * w.signum()
                }
            }
        }
    }

    fn second_derivative(&self, w: f64) -> f64 {
        match self {
            BuiltinLoss::Square => 1.0,
            BuiltinLoss::Logistic => {
                let s = sigmoid(w);
                s * (1.0 - s)
            }
            BuiltinLoss::Huber => {
                if w.abs() <= 1.0 {
                    2.0
                } else {
                    0.0
                }
            }
        }
    }

    fn has_conjugate(&self) -> bool {
        true
    }

    fn conjugate(&self, y: f64) -> f64 {
        match self {
            BuiltinLoss::Square => 0.5 * y * y,
            BuiltinLoss::Logistic => {
                if !(0.0..=1.0).contains(&y) {
                    return f64::INFINITY;
                }
                let y = y.max(LOGISTIC_CLAMP).min(1.0 - LOGISTIC_CLAMP);
                y * y.ln() + (1.0 - y) * (1.0 - y).ln()
            }
            BuiltinLoss::Huber => {
                if y.abs() <= 2.0 {
                    0.25 * y * y
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

#[derive(Clone)]
pub struct MlProblem {
    loss: Arc<dyn Loss>,
    a: SharedOperator,
    b: Arc<[f64]>,
    lambda1: f64,
    lambda2: f64,
}

impl MlProblem {
    pub fn new(
        loss: Arc<dyn Loss>,
        a: SharedOperator,
        b: Vec<f64>,
        lambda1: f64,
        lambda2: f64,
    ) -> Result<Self, ProblemError> {
        check_dim("labels", a.output_dim(), b.len())?;
        if !a.has_adjoint() {
            return Err(ProblemError::MissingAdjoint("data operator"));
        }
        if !(lambda1 >= 0.0 && lambda2 >= 0.0) || !lambda1.is_finite() || !lambda2.is_finite() {
            return Err(ProblemError::InvalidParameter("regularization weights must be finite and nonnegative"));
        }
        if lambda1 == 0.0 && lambda2 == 0.0 {
            return Err(ProblemError::InvalidParameter("lambda1 and lambda2 cannot both be zero"));
        }
        Ok(MlProblem { loss, a, b: b.into(), lambda1, lambda2 })
    }

    /// `1/2 ||Ax - b||^2 + lambda1 ||x||_1`
    pub fn lasso(a: SharedOperator, b: Vec<f64>, lambda1: f64) -> Result<Self, ProblemError> {
        Self::new(Arc::new(BuiltinLoss::Square), a, b, lambda1, 0.0)
    }

    pub fn elastic_net(a: SharedOperator, b: Vec<f64>, lambda1: f64, lambda2: f64) -> Result<Self, ProblemError> {
        Self::new(Arc::new(BuiltinLoss::Square), a, b, lambda1, lambda2)
    }

    /// Logistic regression with labels in `{-1, 1}`: rows of `a` must already
    /// be scaled by `-label`; `b` is zero.
    pub fn logistic(a: SharedOperator, lambda1: f64, lambda2: f64) -> Result<Self, ProblemError> {
        let n_rows = a.output_dim();
        Self::new(Arc::new(BuiltinLoss::Logistic), a, vec![0.0; n_rows], lambda1, lambda2)
    }

    pub fn huber(a: SharedOperator, b: Vec<f64>, lambda1: f64) -> Result<Self, ProblemError> {
        Self::new(Arc::new(BuiltinLoss::Huber), a, b, lambda1, 0.0)
    }

    pub fn n(&self) -> usize {
        self.a.input_dim()
    }
    pub fn samples(&self) -> usize {
        self.b.len()
    }
    pub fn loss(&self) -> &dyn Loss {
        &*self.loss
    }
    pub fn data(&self) -> &SharedOperator {
        &self.a
    }
    pub fn labels(&self) -> &[f64] {
        &self.b
    }
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.samples()];
        self.a.apply_into(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(self.b.iter()) {
            *ri -= bi;
        }
        r
    }

    fn adjoint(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.a.apply_adjoint_into(v, &mut out).expect("adjoint checked at construction");
        out
    }

    /// `sum loss(Ax - b) + lambda2/2 ||x||^2`
    pub fn smooth_value(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        r.iter().map(|&w| self.loss.value(w)).sum::<f64>() + 0.5 * self.lambda2 * dot(x, x)
    }

    /// Full primal objective including the l1 term.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.smooth_value(x) + self.lambda1 * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `A^T loss'(Ax - b) + lambda2 x`
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n()];
        self.gradient_into(x, &mut g);
        g
    }

    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        let d: Vec<f64> = self.residual(x).iter().map(|&w| self.loss.derivative(w)).collect();
        self.a.apply_adjoint_into(&d, g).expect("adjoint checked at construction");
        axpy(self.lambda2, x, g);
    }

    /// Hessian `A^T diag(loss''(Ax - b)) A + lambda2 I` at `x`.
    pub fn hessian_operator(&self, x: &[f64]) -> MlHessian {
        let mut h = MlHessian {
            loss: self.loss.clone(),
            a: self.a.clone(),
            b: self.b.clone(),
            curvature: vec![0.0; self.samples()],
            lambda2: self.lambda2,
            fixed: false,
        };
        h.update(x);
        h
    }

    /// Hessian of the solver's model of `f`: the exact Hessian, or the
    /// loss's constant model curvature when it has one.
    pub fn model_hessian(&self, x: &[f64]) -> MlHessian {
        match self.loss.model_curvature() {
            Some(c) => MlHessian {
                loss: self.loss.clone(),
                a: self.a.clone(),
                b: self.b.clone(),
                curvature: vec![c; self.samples()],
                lambda2: self.lambda2,
                fixed: true,
            },
            None => self.hessian_operator(x),
        }
    }

    /// Operator and right-hand side of the x-subproblem at `x_k` for the
    /// `M = I, c = 0, sigma = 0` lowering:
    /// `(H + rho I) x = H x_k - grad f(x_k) + rho (z - u)`, with `H` from
    /// [`MlProblem::model_hessian`].
    pub fn x_system(&self, x_k: &[f64], z: &[f64], u: &[f64], rho: f64) -> (Shifted<MlHessian>, Vec<f64>) {
        let h = self.model_hessian(x_k);
        let mut rhs = vec![0.0; self.n()];
        h.apply_into(x_k, &mut rhs);
        let g = self.gradient(x_k);
        for i in 0..rhs.len() {
            rhs[i] += rho * (z[i] - u[i]) - g[i];
        }
        (Shifted { inner: h, shift: rho }, rhs)
    }

    /// Dual point `nu = loss'(Ax - b)`, scaled into the feasible region when
    /// `lambda2 = 0`. The scale never exceeds one.
    pub fn dual_point(&self, x: &[f64]) -> Vec<f64> {
        let mut nu: Vec<f64> = self.residual(x).iter().map(|&w| self.loss.derivative(w)).collect();
        if self.lambda2 == 0.0 {
            let w = norm_inf(&self.adjoint(&nu));
            if w > 0.0 {
                let s = (self.lambda1 / w).min(1.0);
                crate::linalg::scale(s, &mut nu);
            }
        }
        nu
    }

    /// Dual objective at `nu`; `-inf` when `nu` is infeasible.
    pub fn dual_value(&self, nu: &[f64]) -> f64 {
        let conj: f64 = nu.iter().map(|&v| self.loss.conjugate(v)).sum();
        if !conj.is_finite() {
            return f64::NEG_INFINITY;
        }
        let atnu = self.adjoint(nu);
        let mut d = -conj - dot(&self.b, nu);
        if self.lambda2 > 0.0 {
            let pen: f64 = atnu.iter().map(|v| (v.abs() - self.lambda1).max(0.0).powi(2)).sum();
            d -= pen / (2.0 * self.lambda2);
        } else if norm_inf(&atnu) > self.lambda1 * (1.0 + 1e-10) {
            return f64::NEG_INFINITY;
        }
        d
    }

    /// Relative duality gap `(p - d) / min(p, |d|)`; `+inf` if the conjugate
    /// is unavailable or infinite at the dual point.
    pub fn dual_gap(&self, x: &[f64]) -> f64 {
        if !self.loss.has_conjugate() {
            return f64::INFINITY;
        }
        let p = self.objective(x);
        let d = self.dual_value(&self.dual_point(x));
        relative_gap(p, d)
    }

    /// Distance from zero to `A^T loss'(Ax - b) + lambda2 x + lambda1 d||x||_1`.
    pub fn subdiff_distance(&self, x: &[f64]) -> f64 {
        let w = self.gradient(x);
        let lam = self.lambda1;
        let mut acc = 0.0;
        for (&xi, &wi) in x.iter().zip(&w) {
            let d = if xi != 0.0 { wi + lam * xi.signum() } else { (wi.abs() - lam).max(0.0) };
            acc += d * d;
        }
        acc.sqrt()
    }

    /// Stopping rule `subdiff_distance(z) <= tol`.
    pub fn subdiff_stopping_rule(&self, tol: f64) -> CustomConvergence {
        let p = self.clone();
        CustomConvergence::new(tol, move |_x, z| p.subdiff_distance(z))
    }

    pub fn to_generic(&self) -> GenericProblem {
        let f = MlObjective { p: self.clone() };
        let g: Arc<dyn super::Regularizer> = if self.lambda1 > 0.0 {
            Arc::new(L1Norm { lambda: self.lambda1 })
        } else {
            Arc::new(ZeroRegularizer)
        };
        GenericProblem::unconstrained(Arc::new(f), g)
            .expect("identity constraint matches")
            .with_structure(Structure::Ml(Arc::new(self.clone())))
    }
}

/// Huber subdifferential distance; see [`MlProblem::subdiff_distance`].
pub fn huber_subdiff_distance(p: &MlProblem, x: &[f64]) -> f64 {
    p.subdiff_distance(x)
}

pub fn relative_gap(p: f64, d: f64) -> f64 {
    if d == f64::NEG_INFINITY || p.is_nan() || d.is_nan() {
        return f64::INFINITY;
    }
    let num = p - d;
    let den = p.min(d.abs());
    if num == 0.0 {
        return 0.0;
    }
    if den <= 0.0 {
        return if num > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    num / den
}

struct MlObjective {
    p: MlProblem,
}

impl SmoothObjective for MlObjective {
    fn dim(&self) -> usize {
        self.p.n()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.p.smooth_value(x)
    }
    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        self.p.gradient_into(x, g)
    }
    fn hessian(&self) -> Box<dyn HessianOperator> {
        let n = self.p.n();
        Box::new(self.p.model_hessian(&vec![0.0; n]))
    }
    fn is_quadratic(&self) -> bool {
        self.p.loss().is_quadratic()
    }
}

/// `A^T diag(loss''(Ax - b)) A + lambda2 I`, refreshed by `update`.
pub struct MlHessian {
    loss: Arc<dyn Loss>,
    a: SharedOperator,
    b: Arc<[f64]>,
    curvature: Vec<f64>,
    lambda2: f64,
    fixed: bool,
}

impl MlHessian {
    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }
}

impl LinearOperator for MlHessian {
    fn input_dim(&self) -> usize {
        self.a.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.a.input_dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.apply_curvature_into(x, y);
        axpy(self.lambda2, x, y);
    }
    fn has_adjoint(&self) -> bool {
        true
    }
    fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
        self.apply_into(u, v);
        Ok(())
    }
}

impl HessianOperator for MlHessian {
    fn update(&mut self, x: &[f64]) {
        if self.fixed {
            return;
        }
        self.a.apply_into(x, &mut self.curvature);
        for (c, bi) in self.curvature.iter_mut().zip(self.b.iter()) {
            *c = self.loss.second_derivative(*c - bi);
        }
    }
    fn is_constant(&self) -> bool {
        self.fixed || self.loss.is_quadratic()
    }
    fn identity_shift(&self) -> f64 {
        self.lambda2
    }
    fn apply_curvature_into(&self, x: &[f64], y: &mut [f64]) {
        let mut ax = vec![0.0; self.curvature.len()];
        self.a.apply_into(x, &mut ax);
        for (v, c) in ax.iter_mut().zip(&self.curvature) {
            *v *= c;
        }
        self.a.apply_adjoint_into(&ax, y).expect("data operator has an adjoint");
    }
}

/// `A + shift I`
pub struct Shifted<A> {
    pub inner: A,
    pub shift: f64,
}

impl<A: LinearOperator> LinearOperator for Shifted<A> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply_into(x, y);
        axpy(self.shift, x, y);
    }
}
