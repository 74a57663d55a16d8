//! Standard problems written in each interface.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use super::{FnObjective, GenericProblem, L1Norm, ProblemError, QpProblem, SimplexIndicator, SmoothObjective};
use crate::linalg::dot;
use crate::operators::{
    stack_vertical, ConstantHessian, CsrMatrix, DiagPlusLowRank, HessianOperator, Identity, LinearOperator, OnesRow,
    OperatorError, SharedOperator,
};
use crate::prox::Hyperrectangle;

/// `x -> A^T A x` without forming the Gram matrix.
pub struct Gram {
    a: SharedOperator,
}

impl Gram {
    pub fn new(a: SharedOperator) -> Result<Self, ProblemError> {
        if !a.has_adjoint() {
            return Err(ProblemError::MissingAdjoint("data operator"));
        }
        Ok(Gram { a })
    }
}

impl LinearOperator for Gram {
    fn input_dim(&self) -> usize {
        self.a.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.a.input_dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut ax = vec![0.0; self.a.output_dim()];
        self.a.apply_into(x, &mut ax);
        self.a.apply_adjoint_into(&ax, y).expect("checked at construction");
    }
    fn has_adjoint(&self) -> bool {
        true
    }
    fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
        self.apply_into(u, v);
        Ok(())
    }
}

/// `1/2 ||Ax - b||^2 + lambda ||x||_1`
pub fn lasso_objective(a: &dyn LinearOperator, b: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let mut r = vec![0.0; b.len()];
    a.apply_into(x, &mut r);
    let rr: f64 = r.iter().zip(b).map(|(ri, bi)| (ri - bi) * (ri - bi)).sum();
    0.5 * rr + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
}

/// Lasso through the generic interface: `f = 1/2 ||Ax - b||^2` with the
/// matrix-free Gram Hessian, `g = lambda ||.||_1`, `M = I`.
pub fn lasso_generic(a: SharedOperator, b: Vec<f64>, lambda: f64) -> Result<GenericProblem, ProblemError> {
    super::check_dim("labels", a.output_dim(), b.len())?;
    let n = a.input_dim();
    let gram: SharedOperator = Arc::new(Gram::new(a.clone())?);
    let (av, bv) = (a.clone(), b.clone());
    let value = move |x: &[f64]| {
        let mut r = vec![0.0; bv.len()];
        av.apply_into(x, &mut r);
        0.5 * r.iter().zip(bv.iter()).map(|(ri, bi)| (ri - bi) * (ri - bi)).sum::<f64>()
    };
    let (ag, bg) = (a, b);
    let gradient = move |x: &[f64], g: &mut [f64]| {
        let mut r = vec![0.0; bg.len()];
        ag.apply_into(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(bg.iter()) {
            *ri -= bi;
        }
        ag.apply_adjoint_into(&r, g).expect("adjoint checked");
    };
    let hessian = move || -> Box<dyn HessianOperator> { Box::new(ConstantHessian::new(gram.clone())) };
    let f = FnObjective::new(n, value, gradient, hessian).quadratic(true);
    GenericProblem::unconstrained(Arc::new(f), Arc::new(L1Norm { lambda }))
}

/// Lasso as a QP over `(x, t)`:
/// `min 1/2 x^T A^T A x - b^T A x + lambda 1^T t  s.t.  x + t >= 0, x - t <= 0`.
///
/// The QP objective differs from the lasso objective by `||b||^2 / 2`.
pub fn lasso_qp(a: &DMatrix<f64>, b: &[f64], lambda: f64) -> Result<QpProblem, ProblemError> {
    super::check_dim("labels", a.nrows(), b.len())?;
    let n = a.ncols();
    let gram = a.transpose() * a;
    let mut p = DMatrix::zeros(2 * n, 2 * n);
    p.view_mut((0, 0), (n, n)).copy_from(&gram);
    let atb = a.transpose() * nalgebra::DVector::from_column_slice(b);
    let mut q = vec![0.0; 2 * n];
    for i in 0..n {
        q[i] = -atb[i];
        q[n + i] = lambda;
    }
    let mut triplets = Vec::with_capacity(4 * n);
    for i in 0..n {
        triplets.push((i, i, 1.0));
        triplets.push((i, n + i, 1.0));
        triplets.push((n + i, i, 1.0));
        triplets.push((n + i, n + i, -1.0));
    }
    let m = CsrMatrix::from_triplets(2 * n, 2 * n, &triplets)?;
    let mut lower = vec![0.0; 2 * n];
    let mut upper = vec![f64::INFINITY; 2 * n];
    for i in 0..n {
        lower[n + i] = f64::NEG_INFINITY;
        upper[n + i] = 0.0;
    }
    QpProblem::new(Arc::new(p), q, Arc::new(m), Hyperrectangle::new(lower, upper)?)
}

/// `min 1/2 ||Ax - b||^2  s.t.  0 <= x <= 1`, as `P = A^T A`, `q = -A^T b`.
pub fn bounded_least_squares(a: &DMatrix<f64>, b: &[f64]) -> Result<QpProblem, ProblemError> {
    super::check_dim("labels", a.nrows(), b.len())?;
    let n = a.ncols();
    let p = a.transpose() * a;
    let q: Vec<f64> = (a.transpose() * nalgebra::DVector::from_column_slice(b)).iter().map(|v| -v).collect();
    QpProblem::new(Arc::new(p), q, Arc::new(Identity::new(n)), Hyperrectangle::uniform(n, 0.0, 1.0)?)
}

/// Factor-model portfolio data: covariance `D + F F^T`, returns `mu`, risk
/// aversion `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioData {
    pub d: Vec<f64>,
    pub f: DMatrix<f64>,
    pub mu: Vec<f64>,
    pub gamma: f64,
}

impl PortfolioData {
    pub fn n(&self) -> usize {
        self.d.len()
    }
    pub fn k(&self) -> usize {
        self.f.ncols()
    }

    /// `gamma/2 x^T (D + F F^T) x - mu^T x`
    pub fn objective(&self, x: &[f64]) -> f64 {
        let xv = nalgebra::DVector::from_column_slice(&x[..self.n()]);
        let ftx = self.f.transpose() * &xv;
        let dx: f64 = self.d.iter().zip(x).map(|(d, xi)| d * xi * xi).sum();
        0.5 * self.gamma * (dx + ftx.norm_squared()) - dot(&self.mu, &x[..self.n()])
    }

    fn validate(&self) -> Result<(), ProblemError> {
        super::check_dim("factor rows", self.n(), self.f.nrows())?;
        super::check_dim("mean returns", self.n(), self.mu.len())?;
        if !(self.gamma > 0.0) {
            return Err(ProblemError::InvalidParameter("risk aversion must be positive"));
        }
        Ok(())
    }
}

/// Lifted QP over `(x, y)` with `y = F^T x`:
/// `P = diag(gamma D, gamma I)`, `q = (-mu, 0)`,
/// rows `[F^T, -I] = 0`, `1^T x = 1`, `x >= 0`.
pub fn portfolio_qp(data: &PortfolioData) -> Result<QpProblem, ProblemError> {
    data.validate()?;
    let (n, k) = (data.n(), data.k());
    let mut pdiag: Vec<f64> = data.d.iter().map(|d| data.gamma * d).collect();
    pdiag.extend(core::iter::repeat(data.gamma).take(k));
    let p = crate::operators::Diagonal::new(pdiag);
    let mut q: Vec<f64> = data.mu.iter().map(|v| -v).collect();
    q.extend(core::iter::repeat(0.0).take(k));

    let mut triplets = Vec::new();
    for j in 0..k {
        for i in 0..n {
            let v = data.f[(i, j)];
            if v != 0.0 {
                triplets.push((j, i, v));
            }
        }
        triplets.push((j, n + j, -1.0));
    }
    for i in 0..n {
        triplets.push((k, i, 1.0));
        triplets.push((k + 1 + i, i, 1.0));
    }
    let m = CsrMatrix::from_triplets(k + 1 + n, n + k, &triplets)?;
    let mut lower = vec![0.0; k + 1 + n];
    let mut upper = vec![0.0; k + 1 + n];
    lower[k] = 1.0;
    upper[k] = 1.0;
    for i in 0..n {
        upper[k + 1 + i] = f64::INFINITY;
    }
    QpProblem::new(Arc::new(p), q, Arc::new(m), Hyperrectangle::new(lower, upper)?)
}

/// Original QP with structured operators: `P = gamma (D + F F^T)` kept
/// factored, `M = [1^T; I]`, `l = (1, 0)`, `u = (1, inf)`.
pub fn portfolio_custom_qp(data: &PortfolioData) -> Result<QpProblem, ProblemError> {
    data.validate()?;
    let n = data.n();
    let p = DiagPlusLowRank::new(data.d.iter().map(|d| data.gamma * d).collect(), &data.f * data.gamma.sqrt())?;
    let m = stack_vertical(vec![Arc::new(OnesRow::new(n)), Arc::new(Identity::new(n))])?;
    let mut lower = vec![0.0; n + 1];
    let mut upper = vec![f64::INFINITY; n + 1];
    lower[0] = 1.0;
    upper[0] = 1.0;
    let q = data.mu.iter().map(|v| -v).collect();
    QpProblem::new(Arc::new(p), q, Arc::new(m), Hyperrectangle::new(lower, upper)?)
}

struct PortfolioObjective {
    cov: Arc<DiagPlusLowRank>,
    mu: Vec<f64>,
}

impl SmoothObjective for PortfolioObjective {
    fn dim(&self) -> usize {
        self.mu.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let mut sx = vec![0.0; x.len()];
        self.cov.apply_into(x, &mut sx);
        0.5 * dot(x, &sx) - dot(&self.mu, x)
    }
    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        self.cov.apply_into(x, g);
        crate::linalg::axpy(-1.0, &self.mu, g);
    }
    fn hessian(&self) -> Box<dyn HessianOperator> {
        Box::new(ConstantHessian::new(self.cov.clone()))
    }
    fn is_quadratic(&self) -> bool {
        true
    }
}

/// Generic form: `f = gamma/2 x^T (D + F F^T) x - mu^T x`, `g` the simplex
/// indicator, `M = I`.
pub fn portfolio_generic(data: &PortfolioData) -> Result<GenericProblem, ProblemError> {
    data.validate()?;
    let cov = DiagPlusLowRank::new(data.d.iter().map(|d| data.gamma * d).collect(), &data.f * data.gamma.sqrt())?;
    let f = PortfolioObjective { cov: Arc::new(cov), mu: data.mu.clone() };
    GenericProblem::unconstrained(Arc::new(f), Arc::new(SimplexIndicator))
}
