//! Randomized Nystrom approximation of symmetric PSD operators and the
//! preconditioner built from it.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{axpy, dot, norm2, scale};
use crate::operators::LinearOperator;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SketchError {
    #[error("sketch rank {rank} must satisfy 1 <= rank <= {dim}")]
    InvalidRank { rank: usize, dim: usize },
    #[error("operator is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("operator does not appear to be positive semidefinite")]
    NotPsd,
    #[error("non-finite values in the sketch")]
    NonFinite,
    #[error("preconditioner shift must be positive, got {0}")]
    NonPositiveShift(f64),
    #[error("diagonal entry {index} is not positive: {value}")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

/// Low-rank eigendecomposition `U diag(lambda_hat) U^T` of a Nystrom sketch.
#[derive(Debug, Clone, PartialEq)]
pub struct NystromSketch {
    basis: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl NystromSketch {
    /// Rank-zero sketch on `R^n`; its preconditioner is the identity.
    pub fn empty(n: usize) -> Self {
        NystromSketch { basis: DMatrix::zeros(n, 0), eigenvalues: Vec::new() }
    }

    /// Assembles a sketch from an orthonormal basis and nonincreasing
    /// nonnegative eigenvalues.
    pub fn from_parts(basis: DMatrix<f64>, eigenvalues: Vec<f64>) -> Result<Self, SketchError> {
        if basis.ncols() != eigenvalues.len() {
            return Err(SketchError::InvalidArgument("basis and eigenvalue counts differ"));
        }
        if eigenvalues.iter().any(|&l| !(l >= 0.0)) || eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(SketchError::InvalidArgument("eigenvalues must be nonnegative and nonincreasing"));
        }
        Ok(NystromSketch { basis, eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest retained eigenvalue, zero for an empty sketch.
    pub fn smallest_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `y = U Lambda U^T x`
    pub fn apply_approx_into(&self, x: &[f64], y: &mut [f64]) {
        let r = self.rank();
        y.fill(0.0);
        if r == 0 {
            return;
        }
        let n = self.dim();
        let data = self.basis.as_slice();
        for j in 0..r {
            let col = &data[j * n..(j + 1) * n];
            let c = self.eigenvalues[j] * dot(col, x);
            axpy(c, col, y);
        }
    }

    /// Dense `U Lambda U^T` (tests and diagnostics).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let lam = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        &self.basis * lam * self.basis.transpose()
    }
}

/// Residual operator `v -> A v - U Lambda U^T v`.
struct SketchResidual<'a, A: ?Sized> {
    op: &'a A,
    sketch: &'a NystromSketch,
}

impl<A: LinearOperator + ?Sized> LinearOperator for SketchResidual<'_, A> {
    fn input_dim(&self) -> usize {
        self.op.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.op.output_dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply_into(x, y);
        let mut t = vec![0.0; y.len()];
        self.sketch.apply_approx_into(x, &mut t);
        axpy(-1.0, &t, y);
    }
}

fn check_square<A: LinearOperator + ?Sized>(a: &A) -> Result<usize, SketchError> {
    let (rows, cols) = (a.output_dim(), a.input_dim());
    if rows != cols {
        return Err(SketchError::NotSquare { rows, cols });
    }
    Ok(rows)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, r: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..n * r).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_vec(n, r, data)
}

fn unit_gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let nv = norm2(&v);
    scale(1.0 / nv, &mut v);
    v
}

/// Rank-`r` randomized Nystrom approximation of the PSD operator `a`.
///
/// Uses a Gaussian test matrix, orthonormalized, and the shifted
/// Cholesky formulation: a tiny multiple of the sketch norm is added before
/// factoring and removed from the eigenvalues afterwards.
pub fn nystrom_sketch<A: LinearOperator + ?Sized>(
    a: &A,
    r: usize,
    seed: u64,
) -> Result<NystromSketch, SketchError> {
    let n = check_square(a)?;
    if r == 0 || r > n {
        return Err(SketchError::InvalidRank { rank: r, dim: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = gaussian_matrix(&mut rng, n, r).qr().q();

    let mut y = DMatrix::<f64>::zeros(n, r);
    {
        let od = omega.as_slice();
        let yd = y.as_mut_slice();
        for j in 0..r {
            a.apply_into(&od[j * n..(j + 1) * n], &mut yd[j * n..(j + 1) * n]);
        }
    }
    if !crate::linalg::all_finite(y.as_slice()) {
        return Err(SketchError::NonFinite);
    }
    let ynorm = y.norm();
    if ynorm == 0.0 {
        return Ok(NystromSketch { basis: omega, eigenvalues: vec![0.0; r] });
    }
    let shift = (n as f64).sqrt() * f64::epsilon() * ynorm;
    let y_nu = &y + &omega * shift;

    let core = omega.transpose() * &y_nu;
    let core = (&core + core.transpose()) * 0.5;
    let chol = core.cholesky().ok_or(SketchError::NotPsd)?;
    // B = Y_nu L^{-T}, formed as B^T = L^{-1} Y_nu^T
    let bt = chol
        .l()
        .solve_lower_triangular(&y_nu.transpose())
        .ok_or(SketchError::NotPsd)?;
    let b = bt.transpose();
    if !crate::linalg::all_finite(b.as_slice()) {
        return Err(SketchError::NonFinite);
    }
    let svd = b.svd(true, false);
    let u = svd.u.ok_or(SketchError::NonFinite)?;
    let eigenvalues: Vec<f64> =
        svd.singular_values.iter().map(|s| (s * s - shift).max(0.0)).collect();
    // svd() returns singular values in descending order; the shift and clamp
    // are monotone so the order is preserved
    Ok(NystromSketch { basis: u, eigenvalues })
}

/// Power-method estimate of `||A - U Lambda U^T||_2`.
///
/// `estimate = ||E v||` for the final unit iterate `v`, which never exceeds
/// the true norm.
pub fn estimate_error_norm<A: LinearOperator + ?Sized>(
    a: &A,
    sketch: &NystromSketch,
    iters: usize,
    seed: u64,
) -> f64 {
    let n = a.input_dim();
    if n == 0 {
        return 0.0;
    }
    let e = SketchResidual { op: a, sketch };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = unit_gaussian(&mut rng, n);
    let mut ev = vec![0.0; n];
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        e.apply_into(&v, &mut ev);
        est = norm2(&ev);
        if est == 0.0 || !est.is_finite() {
            break;
        }
        v.copy_from_slice(&ev);
        scale(1.0 / est, &mut v);
    }
    est
}

/// Upper bound `1 + (lambda_hat_r + ||E||) / nu` on the condition number of
/// the preconditioned system `L^{-1/2}(A + nu I)L^{-1/2}`.
pub fn condition_bound(sketch: &NystromSketch, error_norm: f64, nu: f64) -> f64 {
    1.0 + (sketch.smallest_eigenvalue() + error_norm) / nu
}

/// Number of power iterations the adaptive sizing uses for `||E||`.
pub const DEFAULT_POWER_ITERS: usize = 10;

/// Grows the sketch rank `r0, 2 r0, 4 r0, ...` (capped at `r_max`) until the
/// condition bound is at most `kappa_target`; returns the `r_max` sketch if
/// it never is.
pub fn adaptive_sketch<A: LinearOperator + ?Sized>(
    a: &A,
    r0: usize,
    r_max: usize,
    nu: f64,
    kappa_target: f64,
    seed: u64,
) -> Result<NystromSketch, SketchError> {
    let n = check_square(a)?;
    if r0 == 0 || r0 > r_max || r_max > n {
        return Err(SketchError::InvalidRank { rank: r0, dim: n });
    }
    if !(nu > 0.0) {
        return Err(SketchError::NonPositiveShift(nu));
    }
    let mut r = r0;
    loop {
        let sk = nystrom_sketch(a, r, seed)?;
        if kappa_target == f64::infinity() || r == r_max {
            return Ok(sk);
        }
        let err = estimate_error_norm(a, &sk, DEFAULT_POWER_ITERS, seed.wrapping_add(r as u64));
        if condition_bound(&sk, err, nu) <= kappa_target {
            return Ok(sk);
        }
        r = (2 * r).min(r_max);
    }
}

/// Lanczos estimates `(lambda_max, lambda_min)` of a symmetric operator,
/// with full reorthogonalization. Stops early on breakdown.
pub fn estimate_extreme_eigs<A: LinearOperator + ?Sized>(
    a: &A,
    iters: usize,
    seed: u64,
) -> Result<(f64, f64), SketchError> {
    let n = check_square(a)?;
    if iters < 2 {
        return Err(SketchError::InvalidArgument("Lanczos needs at least two iterations"));
    }
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let steps = iters.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut q = unit_gaussian(&mut rng, n);
    let mut w = vec![0.0; n];
    for j in 0..steps {
        a.apply_into(&q, &mut w);
        let aj = dot(&q, &w);
        alpha.push(aj);
        basis.push(q.clone());
        // two passes of classical Gram-Schmidt against every Lanczos vector
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
        }
        let bj = norm2(&w);
        let scale_ref = alpha.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        if j + 1 == steps || bj <= 1e-12 * scale_ref || !bj.is_finite() {
            break;
        }
        beta.push(bj);
        q.copy_from_slice(&w);
        scale(1.0 / bj, &mut q);
    }
    let k = alpha.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let ev = t.symmetric_eigenvalues();
    let max = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((max, min))
}

/// `x -> S A S x` with `S = diag(s)`.
pub struct DiagonallyScaled<A> {
    inner: A,
    s: Vec<f64>,
}

impl<A: LinearOperator> DiagonallyScaled<A> {
    pub fn scaling(&self) -> &[f64] {
        &self.s
    }
}

impl<A: LinearOperator> LinearOperator for DiagonallyScaled<A> {
    fn input_dim(&self) -> usize {
        self.s.len()
    }
    fn output_dim(&self) -> usize {
        self.s.len()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let sx: Vec<f64> = x.iter().zip(&self.s).map(|(a, b)| a * b).collect();
        self.inner.apply_into(&sx, y);
        for (yi, si) in y.iter_mut().zip(&self.s) {
            *yi *= si;
        }
    }
    fn has_adjoint(&self) -> bool {
        true
    }
    fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), crate::operators::OperatorError> {
        self.apply_into(u, v);
        Ok(())
    }
}

/// Rewrites `(A + D) w = b` as `(D^{-1/2} A D^{-1/2} + I) w~ = D^{-1/2} b`.
///
/// Returns the reduced operator and `d^{-1/2}`; the original solution is
/// `w = d^{-1/2} * w~` elementwise.
pub fn diagonal_reduce<A: LinearOperator>(
    a: A,
    d: &[f64],
) -> Result<(DiagonallyScaled<A>, Vec<f64>), SketchError> {
    let n = check_square(&a)?;
    if d.len() != n {
        return Err(SketchError::InvalidArgument("diagonal length does not match operator"));
    }
    if let Some((index, &value)) = d.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(SketchError::NonPositiveDiagonal { index, value });
    }
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    Ok((DiagonallyScaled { inner: a, s: s.clone() }, s))
}

/// Nystrom preconditioner for `A + nu I`:
/// `L^{-1} = (lambda_r + nu) U (Lambda + nu I)^{-1} U^T + I - U U^T`.
#[derive(Debug, Clone)]
pub struct NystromPreconditioner {
    sketch: NystromSketch,
    nu: f64,
}

impl NystromPreconditioner {
    pub fn new(sketch: NystromSketch, nu: f64) -> Result<Self, SketchError> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(SketchError::NonPositiveShift(nu));
        }
        Ok(NystromPreconditioner { sketch, nu })
    }

    pub fn identity(n: usize) -> Self {
        NystromPreconditioner { sketch: NystromSketch::empty(n), nu: 1.0 }
    }

    pub fn sketch(&self) -> &NystromSketch {
        &self.sketch
    }
    pub fn shift(&self) -> f64 {
        self.nu
    }
    pub fn dim(&self) -> usize {
        self.sketch.dim()
    }

    /// Changes `nu` without touching the sketch.
    pub fn update_shift(&mut self, nu: f64) -> Result<(), SketchError> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(SketchError::NonPositiveShift(nu));
        }
        self.nu = nu;
        Ok(())
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(v);
        let r = self.sketch.rank();
        if r == 0 {
            return;
        }
        let n = self.sketch.dim();
        let lr = self.sketch.smallest_eigenvalue() + self.nu;
        let data = self.sketch.basis.as_slice();
        for j in 0..r {
            let col = &data[j * n..(j + 1) * n];
            let c = (lr / (self.sketch.eigenvalues[j] + self.nu) - 1.0) * dot(col, v);
            axpy(c, col, out);
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    /// Dense `L^{-1}` (tests only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let u = &self.sketch.basis;
        let lr = self.sketch.smallest_eigenvalue() + self.nu;
        let d: Vec<f64> = self.sketch.eigenvalues.iter().map(|l| lr / (l + self.nu)).collect();
        let dd = DMatrix::from_diagonal(&DVector::from_vec(d));
        u * dd * u.transpose() + DMatrix::identity(n, n) - u * u.transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::Diagonal;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0f64, |a, b| a.max(b.abs()))
    }

    #[test]
    fn exact_rank_recovery() {
        let a = Diagonal::new(vec![3.0, 2.0, 0.0, 0.0]);
        let sk = nystrom_sketch(&a, 2, 0).unwrap();
        assert!((sk.eigenvalues()[0] - 3.0).abs() < 1e-10);
        assert!((sk.eigenvalues()[1] - 2.0).abs() < 1e-10);
        let diff = sk.to_dense() - crate::operators::to_dense(&a);
        assert!(diff.norm() <= 1e-8 * 13f64.sqrt());
        assert!(estimate_error_norm(&a, &sk, 20, 1) <= 1e-8);
    }

    #[test]
    fn identity_sketch() {
        let sk = nystrom_sketch(&crate::operators::Identity::new(3), 3, 4).unwrap();
        for l in sk.eigenvalues() {
            assert!((l - 1.0).abs() < 1e-10);
        }
        let uut = sk.basis() * sk.basis().transpose();
        assert!(max_abs(&(uut - DMatrix::identity(3, 3))) < 1e-10);
    }

    #[test]
    fn zero_operator_gives_zero_eigenvalues() {
        let sk = nystrom_sketch(&crate::operators::Zero::new(4, 4), 2, 0).unwrap();
        assert_eq!(sk.eigenvalues(), &[0.0, 0.0]);
    }

    #[test]
    fn rank_and_shape_errors() {
        let a = Diagonal::new(vec![1.0, 1.0]);
        assert!(matches!(nystrom_sketch(&a, 0, 0), Err(SketchError::InvalidRank { .. })));
        assert!(matches!(nystrom_sketch(&a, 3, 0), Err(SketchError::InvalidRank { .. })));
        let rect = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(nystrom_sketch(&rect, 1, 0), Err(SketchError::NotSquare { .. })));
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = Diagonal::new(vec![-1.0, -2.0, -3.0]);
        assert_eq!(nystrom_sketch(&a, 3, 0).unwrap_err(), SketchError::NotPsd);
    }

    #[test]
    fn preconditioner_examples() {
        let sk = NystromSketch::from_parts(DMatrix::identity(2, 2), vec![2.0, 1.0]).unwrap();
        let p = NystromPreconditioner::new(sk, 1.0).unwrap();
        let out = p.apply(&[1.0, 1.0]);
        assert!((out[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((out[1] - 1.0).abs() < 1e-15);

        let id = NystromPreconditioner::new(NystromSketch::empty(3), 0.5).unwrap();
        assert_eq!(id.apply(&[1.0, -2.0, 3.0]), vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn shift_update() {
        let a = Diagonal::new(vec![5.0, 3.0, 1.0, 0.5]);
        let sk = nystrom_sketch(&a, 2, 3).unwrap();
        let mut p = NystromPreconditioner::new(sk, 1.0).unwrap();
        let v = [1.0, 2.0, 3.0, 4.0];
        let before = p.apply(&v);
        p.update_shift(1.0).unwrap();
        assert_eq!(before, p.apply(&v));
        p.update_shift(2.0).unwrap();
        let dense = p.to_dense() * DVector::from_column_slice(&v);
        for (g, w) in p.apply(&v).iter().zip(dense.iter()) {
            assert!((g - w).abs() < 1e-12);
        }
        assert!(p.update_shift(0.0).is_err());
        assert!(p.update_shift(-1.0).is_err());
    }

    #[test]
    fn error_estimates() {
        let a = Diagonal::new(vec![3.0, 2.0, 1.0]);
        let e = Diagonal::new(vec![3.0, 2.0, 0.0]);
        let sk = nystrom_sketch(&e, 2, 0).unwrap();
        let est = estimate_error_norm(&a, &sk, 20, 5);
        assert!((0.9..=1.0 + 1e-12).contains(&est), "{est}");

        let i = crate::operators::Identity::new(6);
        let est = estimate_error_norm(&i, &NystromSketch::empty(6), 50, 2);
        assert!((0.99..=1.0 + 1e-12).contains(&est));
    }

    #[test]
    fn adaptive_sizing() {
        let mut d = vec![1e-6; 8];
        d[0] = 100.0;
        let a = Diagonal::new(d);
        let sk = adaptive_sketch(&a, 1, 8, 1.0, 10.0, 0).unwrap();
        let err = estimate_error_norm(&a, &sk, 30, 1);
        assert!(condition_bound(&sk, err, 1.0) <= 10.0);
        assert!(condition_bound(&sk, err, 1.0) < 1.0 + 1e-5);
        assert_eq!(sk.rank(), 2);

        let sk = adaptive_sketch(&a, 1, 8, 1.0, f64::INFINITY, 0).unwrap();
        assert_eq!(sk.rank(), 1);

        let i = crate::operators::Identity::new(50);
        let sk = adaptive_sketch(&i, 1, 16, 1e-3, 2.0, 0).unwrap();
        assert_eq!(sk.rank(), 16);
    }

    #[test]
    fn lanczos_small() {
        let (mx, mn) = estimate_extreme_eigs(&Diagonal::new(vec![4.0, 1.0]), 2, 0).unwrap();
        assert!((mx - 4.0).abs() < 1e-6 && (mn - 1.0).abs() < 1e-6);
        let (mx, mn) = estimate_extreme_eigs(&crate::operators::Identity::new(10), 10, 0).unwrap();
        assert!((mx - 1.0).abs() < 1e-12 && (mn - 1.0).abs() < 1e-12);
        assert!(estimate_extreme_eigs(&Diagonal::new(vec![1.0]), 1, 0).is_err());
    }

    #[test]
    fn diagonal_reduction() {
        let a = Diagonal::new(vec![2.0, 4.0]);
        let (red, s) = diagonal_reduce(&a, &[2.0, 2.0]).unwrap();
        let got = red.apply(&[1.0, 1.0]).unwrap();
        assert!((got[0] - 1.0).abs() < 1e-15 && (got[1] - 2.0).abs() < 1e-15);
        assert!((s[0] - 0.5f64.sqrt()).abs() < 1e-15);

        let zero = crate::operators::Zero::new(2, 2);
        let (_, s) = diagonal_reduce(&zero, &[4.0, 9.0]).unwrap();
        let b = [2.0, 3.0];
        let wt: Vec<f64> = b.iter().zip(&s).map(|(b, s)| b * s).collect();
        assert_eq!(wt, vec![1.0, 1.0]);
        let w: Vec<f64> = wt.iter().zip(&s).map(|(a, b)| a * b).collect();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 1.0 / 3.0).abs() < 1e-15);

        assert!(matches!(
            diagonal_reduce(&zero, &[1.0, 0.0]),
            Err(SketchError::NonPositiveDiagonal { index: 1, .. })
        ));
    }

    #[test]
    fn deterministic() {
        let a = Diagonal::new((1..=10).map(|i| i as f64).collect());
        assert_eq!(nystrom_sketch(&a, 4, 9).unwrap(), nystrom_sketch(&a, 4, 9).unwrap());
    }
}
