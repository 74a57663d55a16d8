//! Preconditioned conjugate gradient.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use thiserror::Error;

use crate::linalg::{all_finite, axpy, dot, norm2};
use crate::operators::{Identity, LinearOperator};
use crate::sketch::NystromPreconditioner;

/// Smallest inner tolerance handed to CG.
pub const TOLERANCE_FLOOR: f64 = 1e-12;

/// Iterations between explicit residual recomputations.
const RESIDUAL_REFRESH: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CgError {
    #[error("operator is not positive definite (p^T A p = {curvature:e} at iteration {iteration})")]
    NotSpd { iteration: usize, curvature: f64 },
    #[error("non-finite value encountered at iteration {iteration}")]
    Numerical { iteration: usize },
    #[error("dimension mismatch: operator is {expected}, vector is {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("relative tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

/// Applies `M^{-1}`, an SPD approximation of the inverse system matrix.
pub trait Preconditioner {
    fn apply_inverse_into(&self, r: &[f64], out: &mut [f64]);
}

impl Preconditioner for Identity {
    fn apply_inverse_into(&self, r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(r);
    }
}

impl Preconditioner for NystromPreconditioner {
    fn apply_inverse_into(&self, r: &[f64], out: &mut [f64]) {
        self.apply_into(r, out);
    }
}

impl<P: Preconditioner + ?Sized> Preconditioner for &P {
    fn apply_inverse_into(&self, r: &[f64], out: &mut [f64]) {
        (**self).apply_inverse_into(r, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub converged: bool,
}

/// Default iteration cap, `10 n`.
pub fn default_max_iter(n: usize) -> usize {
    (10 * n).max(10)
}

/// Solves `A x = b` in place, warm-started from the incoming `x`.
///
/// Stops when `||b - A x|| <= tol_rel ||b||` (unpreconditioned residual) or
/// after `max_iter` iterations, leaving the last iterate in `x`.
pub fn pcg_into<A, P>(
    a: &A,
    b: &[f64],
    x: &mut [f64],
    precond: &P,
    tol_rel: f64,
    max_iter: usize,
) -> Result<CgReport, CgError>
where
    A: LinearOperator + ?Sized,
    P: Preconditioner + ?Sized,
{
    let n = a.input_dim();
    if b.len() != n || x.len() != n || a.output_dim() != n {
        return Err(CgError::DimensionMismatch { expected: n, actual: b.len() });
    }
    if !(tol_rel > 0.0) {
        return Err(CgError::InvalidTolerance(tol_rel));
    }
    let bnorm = norm2(b);
    if !bnorm.is_finite() || !all_finite(x) {
        return Err(CgError::Numerical { iteration: 0 });
    }
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(CgReport { iterations: 0, final_relative_residual: 0.0, converged: true });
    }
    let target = tol_rel * bnorm;

    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    true_residual(a, b, x, &mut r, &mut ap);
    let mut rnorm = norm2(&r);
    if rnorm <= target {
        return Ok(CgReport { iterations: 0, final_relative_residual: rnorm / bnorm, converged: true });
    }
    let mut zv = vec![0.0; n];
    precond.apply_inverse_into(&r, &mut zv);
    let mut p = zv.clone();
    let mut rz = dot(&r, &zv);

    let mut k = 0;
    while k < max_iter {
        k += 1;
        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() {
            return Err(CgError::Numerical { iteration: k });
        }
        if pap <= 0.0 {
            return Err(CgError::NotSpd { iteration: k, curvature: pap });
        }
        let step = rz / pap;
        axpy(step, &p, x);
        if k % RESIDUAL_REFRESH == 0 {
            true_residual(a, b, x, &mut r, &mut ap);
        } else {
            axpy(-step, &ap, &mut r);
        }
        rnorm = norm2(&r);
        if !rnorm.is_finite() {
            return Err(CgError::Numerical { iteration: k });
        }
        if rnorm <= target {
            // confirm against the explicit residual before declaring success
            true_residual(a, b, x, &mut r, &mut ap);
            rnorm = norm2(&r);
            if rnorm <= target {
                return Ok(CgReport { iterations: k, final_relative_residual: rnorm / bnorm, converged: true });
            }
        }
        precond.apply_inverse_into(&r, &mut zv);
        let rz_new = dot(&r, &zv);
        if !rz_new.is_finite() {
            return Err(CgError::Numerical { iteration: k });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&zv) {
            *pi = zi + beta * *pi;
        }
    }
    true_residual(a, b, x, &mut r, &mut ap);
    rnorm = norm2(&r);
    Ok(CgReport { iterations: k, final_relative_residual: rnorm / bnorm, converged: rnorm <= target })
}

fn true_residual<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &[f64], r: &mut [f64], work: &mut [f64]) {
    a.apply_into(x, work);
    for ((ri, bi), wi) in r.iter_mut().zip(b).zip(work.iter()) {
        *ri = bi - wi;
    }
}

/// Allocating wrapper around [`pcg_into`].
pub fn pcg<A, P>(
    a: &A,
    b: &[f64],
    x0: &[f64],
    precond: &P,
    tol_rel: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgReport), CgError>
where
    A: LinearOperator + ?Sized,
    P: Preconditioner + ?Sized,
{
    let mut x = x0.to_vec();
    let report = pcg_into(a, b, &mut x, precond, tol_rel, max_iter)?;
    Ok((x, report))
}

/// Inner tolerance for outer iteration `k >= 1`:
/// `min(sqrt(rp * rd), 1) / k^gamma`, floored at [`TOLERANCE_FLOOR`].
pub fn cg_tolerance(k: usize, rp_norm: f64, rd_norm: f64, gamma: f64) -> f64 {
    let k = k.max(1) as f64;
    let base = Float::sqrt(rp_norm * rd_norm);
    let base = if base.is_nan() { 1.0 } else { base.min(1.0) };
    (base / Float::powf(k, gamma)).max(TOLERANCE_FLOOR)
}
