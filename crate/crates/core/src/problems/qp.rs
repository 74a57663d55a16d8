//! Quadratic programs `min 1/2 x^T P x + q^T x  s.t.  l <= M x <= u`.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_dim, BoxIndicator, GenericProblem, ProblemError, QpData, SmoothObjective, Structure};
use crate::linalg::{dot, norm2};
use crate::operators::{ConstantHessian, HessianOperator, LinearOperator, SharedOperator};
use crate::prox::Hyperrectangle;

/// `1/2 x^T P x + q^T x`
pub struct QuadraticObjective {
    p: SharedOperator,
    q: Vec<f64>,
}

impl QuadraticObjective {
    pub fn new(p: SharedOperator, q: Vec<f64>) -> Result<Self, ProblemError> {
        check_dim("P rows", p.input_dim(), p.output_dim())?;
        check_dim("q", p.input_dim(), q.len())?;
        Ok(QuadraticObjective { p, q })
    }
}

impl SmoothObjective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.q.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; x.len()];
        self.p.apply_into(x, &mut px);
        0.5 * dot(x, &px) + dot(&self.q, x)
    }
    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        self.p.apply_into(x, g);
        crate::linalg::axpy(1.0, &self.q, g);
    }
    fn hessian(&self) -> Box<dyn HessianOperator> {
        Box::new(ConstantHessian::new(self.p.clone()))
    }
    fn is_quadratic(&self) -> bool {
        true
    }
}

/// Relative symmetry defect of `p` measured on a few random probes.
pub fn symmetry_defect(p: &dyn LinearOperator, probes: usize, seed: u64) -> f64 {
    let n = p.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut pu = vec![0.0; n];
    let mut pv = vec![0.0; n];
    for _ in 0..probes {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        p.apply_into(&u, &mut pu);
        p.apply_into(&v, &mut pv);
        let scale = norm2(&pu) * norm2(&v) + norm2(&pv) * norm2(&u);
        if scale > 0.0 {
            worst = worst.max((dot(&pu, &v) - dot(&u, &pv)).abs() / scale);
        }
    }
    worst
}

#[derive(Clone)]
pub struct QpProblem {
    pub p: SharedOperator,
    pub q: Vec<f64>,
    pub m: SharedOperator,
    pub bounds: Hyperrectangle,
}

impl QpProblem {
    pub fn new(p: SharedOperator, q: Vec<f64>, m: SharedOperator, bounds: Hyperrectangle) -> Result<Self, ProblemError> {
        let n = q.len();
        check_dim("P", n, p.input_dim())?;
        check_dim("P rows", n, p.output_dim())?;
        check_dim("M input", n, m.input_dim())?;
        check_dim("bounds", m.output_dim(), bounds.len())?;
        if !m.has_adjoint() {
            return Err(ProblemError::MissingAdjoint("constraint operator"));
        }
        if symmetry_defect(&*p, 3, 0x5eed) > 1e-8 {
            return Err(ProblemError::InvalidParameter("P is not symmetric"));
        }
        Ok(QpProblem { p, q, m, bounds })
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }
    pub fn m(&self) -> usize {
        self.bounds.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; x.len()];
        self.p.apply_into(x, &mut px);
        0.5 * dot(x, &px) + dot(&self.q, x)
    }

    /// `f = 1/2 x^T P x + q^T x`, `g` the box indicator, `c = 0`.
    pub fn to_generic(&self) -> GenericProblem {
        let f = QuadraticObjective { p: self.p.clone(), q: self.q.clone() };
        let g = BoxIndicator { bounds: self.bounds.clone() };
        GenericProblem::new(Arc::new(f), Arc::new(g), self.m.clone(), vec![0.0; self.m()])
            .expect("dimensions validated at construction")
            .with_structure(Structure::Qp(QpData {
                p: self.p.clone(),
                q: self.q.clone(),
                bounds: self.bounds.clone(),
            }))
    }
}
