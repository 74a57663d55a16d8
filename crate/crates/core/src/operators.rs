//! Matrix-free linear operators.
//!
//! Everything the solver multiplies by (the constraint map `M`, the QP
//! objective matrix `P`, Hessian-vector products) goes through
//! [`LinearOperator`]. Implementations only need the forward product; the
//! adjoint is optional, though the constraint map of a problem must have one.
//!
//! The `*_into` methods write into caller-owned buffers and do not check
//! lengths beyond debug assertions. The allocating [`LinearOperator::apply`]
//! and [`LinearOperator::apply_adjoint`] check dimensions and return
//! [`OperatorError`] on mismatch.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVectorView, DVectorViewMut};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OperatorError {
    #[error("dimension mismatch: expected a vector of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("operator does not implement its adjoint")]
    AdjointUnsupported,
    #[error("stacked operators must share the input dimension: {expected} vs {actual}")]
    StackMismatch { expected: usize, actual: usize },
    #[error("cannot stack an empty list of operators")]
    EmptyStack,
    #[error("invalid operator data: {0}")]
    InvalidData(&'static str),
}

/// A linear map `R^input_dim -> R^output_dim`.
pub trait LinearOperator: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// `y = A x`. `x.len() == input_dim`, `y.len() == output_dim`.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn has_adjoint(&self) -> bool {
        false
    }

    /// `v = A^T u`.
    fn apply_adjoint_into(&self, _u: &[f64], _v: &mut [f64]) -> Result<(), OperatorError> {
        Err(OperatorError::AdjointUnsupported)
    }

    /// Fast-path hint: the operator is the identity on `R^n`.
    fn is_identity(&self) -> bool {
        false
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, OperatorError> {
        if x.len() != self.input_dim() {
            return Err(OperatorError::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let mut y = vec![0.0; self.output_dim()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    fn apply_adjoint(&self, u: &[f64]) -> Result<Vec<f64>, OperatorError> {
        if !self.has_adjoint() {
            return Err(OperatorError::AdjointUnsupported);
        }
        if u.len() != self.output_dim() {
            return Err(OperatorError::DimensionMismatch {
                expected: self.output_dim(),
                actual: u.len(),
            });
        }
        let mut v = vec![0.0; self.input_dim()];
        self.apply_adjoint_into(u, &mut v)?;
        Ok(v)
    }
}

/// Shared, thread-safe operator handle used by the problem types.
pub type SharedOperator = Arc<dyn LinearOperator>;

macro_rules! forward_operator {
    ($($ty:ty),*) => {$(
        impl<T: LinearOperator + ?Sized> LinearOperator for $ty {
            fn input_dim(&self) -> usize { (**self).input_dim() }
            fn output_dim(&self) -> usize { (**self).output_dim() }
            fn apply_into(&self, x: &[f64], y: &mut [f64]) { (**self).apply_into(x, y) }
            fn has_adjoint(&self) -> bool { (**self).has_adjoint() }
            fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
                (**self).apply_adjoint_into(u, v)
            }
            fn is_identity(&self) -> bool { (**self).is_identity() }
        }
    )*};
}

forward_operator!(&T, Box<T>, Arc<T>);

/// Hessian-vector product of a smooth objective at the current iterate.
///
/// This is the only operator the solver mutates: `update` is called with the
/// current `x` before each x-subproblem. Implementations must be symmetric.
pub trait HessianOperator: LinearOperator {
    fn update(&mut self, x: &[f64]);

    /// The Hessian does not depend on `x` (quadratic objectives).
    fn is_constant(&self) -> bool {
        false
    }

    /// A multiple `s` of the identity contained in the Hessian, e.g. the
    /// ridge weight of an ML objective. The preconditioner sketches
    /// `H - s I` and folds `s` into its shift.
    fn identity_shift(&self) -> f64 {
        0.0
    }

    /// `y = (H - s I) x` with `s = identity_shift()`.
    fn apply_curvature_into(&self, x: &[f64], y: &mut [f64]) {
        self.apply_into(x, y);
        let s = self.identity_shift();
        if s != 0.0 {
            crate::linalg::axpy(-s, x, y);
        }
    }
}

impl<T: HessianOperator + ?Sized> HessianOperator for Box<T> {
    fn update(&mut self, x: &[f64]) {
        (**self).update(x)
    }
    fn is_constant(&self) -> bool {
        (**self).is_constant()
    }
    fn identity_shift(&self) -> f64 {
        (**self).identity_shift()
    }
    fn apply_curvature_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_curvature_into(x, y)
    }
}

/// Identity on `R^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Identity {
    pub dim: usize,
}

impl Identity {
    pub fn new(dim: usize) -> Self {
        Identity { dim }
    }
}

impl LinearOperator for Identity {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
    fn has_adjoint(&self) -> bool {
        true
    }
    fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
        v.copy_from_slice(u);
        Ok(())
    }
    fn is_identity(&self) -> bool {
        true
    }
}

/// The zero map `R^cols -> R^rows`.
#[derive(Debug, Clone, Copy)]
pub struct Zero {
    rows: usize,
    cols: usize,
}

impl Zero {
    pub fn new(rows: usize, cols: usize) -> Self {
        Zero { rows, cols }
    }
}

impl LinearOperator for Zero {
    fn input_dim(&self) -> usize {
        self.cols
    }
    fn output_dim(&self) -> usize {
        self.rows
    }
    fn apply_into(&self, _x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
    }
    fn has_adjoint(&self) -> bool {
        true
    }
    fn apply_adjoint_into(&self, _u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
        v.fill(0.0);
        Ok(())
    }
}

/// Diagonal matrix `diag(d)`.
#[derive(Debug, Clone)]
pub struct Diagonal {
    diag: Vec<f64>,
}

impl Diagonal {
    pub fn new(diag: Vec<f64>) -> Self {
        Diagonal { diag }
    }
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

impl LinearOperator for Diagonal {
    fn input_dim(&self) -> usize {
        self.diag.len()
    }
    fn output_dim(&self) -> usize {
        self.diag.len()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.diag) {
            *yi = di * xi;
        }
    }
    fn has_adjoint(&self) -> bool {
        true
    }
    fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
        self.apply_into(u, v);
        Ok(())
    }
}

/// The `1 x n` row of ones, `x -> 1^T x`.
#[derive(Debug, Clone, Copy)]
pub struct OnesRow {
    pub dim: usize,
}

impl OnesRow {
    pub fn new(dim: usize) -> Self {
        OnesRow { dim }
    }
}

impl LinearOperator for OnesRow {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y[0] = x.iter().sum();
    }
    fn has_adjoint(&self) -> bool {
        true
    }
    fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
        v.fill(u[0]);
        Ok(())
    }
}

/// `alpha * A`.
pub struct Scaled<A> {
    inner: A,
    factor: f64,
}

impl<A: LinearOperator> Scaled<A> {
    pub fn new(inner: A, factor: f64) -> Self {
        Scaled { inner, factor }
    }
}

impl<A: LinearOperator> LinearOperator for Scaled<A> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply_into(x, y);
        crate::linalg::scale(self.factor, y);
    }
    fn has_adjoint(&self) -> bool {
        self.inner.has_adjoint()
    }
    fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
        self.inner.apply_adjoint_into(u, v)?;
        crate::linalg::scale(self.factor, v);
        Ok(())
    }
}

impl LinearOperator for DMatrix<f64> {
    fn input_dim(&self) -> usize {
        self.ncols()
    }
    fn output_dim(&self) -> usize {
        self.nrows()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let xv = DVectorView::from_slice(x, self.ncols());
        let mut yv = DVectorViewMut::from_slice(y, self.nrows());
        yv.gemv(1.0, self, &xv, 0.0);
    }
    fn has_adjoint(&self) -> bool {
        true
    }
    fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
        let uv = DVectorView::from_slice(u, self.nrows());
        let mut vv = DVectorViewMut::from_slice(v, self.ncols());
        vv.gemv_tr(1.0, self, &uv, 0.0);
        Ok(())
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros are kept out.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, OperatorError> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(OperatorError::InvalidData("triplet index out of bounds"));
            }
            sorted.push((i, j, v));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut data: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *data.last_mut().unwrap() += v;
                continue;
            }
            indices.push(j);
            data.push(v);
            indptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        let mut m = CsrMatrix { nrows, ncols, indptr, indices, data };
        m.prune_zeros();
        Ok(m)
    }

    /// Builds from raw CSR arrays, validating the structure.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<f64>,
    ) -> Result<Self, OperatorError> {
        if indptr.len() != nrows + 1 || indices.len() != data.len() {
            return Err(OperatorError::InvalidData("inconsistent CSR array lengths"));
        }
        if indptr[0] != 0 || indptr[nrows] != data.len() || indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(OperatorError::InvalidData("row pointers are not monotone"));
        }
        if indices.iter().any(|&j| j >= ncols) {
            return Err(OperatorError::InvalidData("column index out of bounds"));
        }
        Ok(CsrMatrix { nrows, ncols, indptr, indices, data })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    fn prune_zeros(&mut self) {
        if self.data.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.data[k] != 0.0 {
                    indices.push(self.indices[k]);
                    data.push(self.data[k]);
                }
            }
            indptr[i + 1] = data.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.data.len()
    }
    pub fn density(&self) -> f64 {
        if self.nrows == 0 || self.ncols == 0 {
            0.0
        } else {
            self.nnz() as f64 / (self.nrows as f64 * self.ncols as f64)
        }
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, &triplets).expect("transpose indices are in range")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] += v;
            }
        }
        d
    }

    pub fn from_dense(d: &DMatrix<f64>) -> CsrMatrix {
        let mut triplets = Vec::new();
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if d[(i, j)] != 0.0 {
                    triplets.push((i, j, d[(i, j)]));
                }
            }
        }
        CsrMatrix::from_triplets(d.nrows(), d.ncols(), &triplets).expect("dense indices are in range")
    }
}

impl LinearOperator for CsrMatrix {
    fn input_dim(&self) -> usize {
        self.ncols
    }
    fn output_dim(&self) -> usize {
        self.nrows
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum();
        }
    }
    fn has_adjoint(&self) -> bool {
        true
    }
    fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
        v.fill(0.0);
        for (i, ui) in u.iter().enumerate() {
            if *ui == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, val) in cols.iter().zip(vals) {
                v[j] += val * ui;
            }
        }
        Ok(())
    }
}

/// Symmetric `diag(d) + F F^T` kept in factored form; products cost `O(nk)`.
#[derive(Debug, Clone)]
pub struct DiagPlusLowRank {
    d: Vec<f64>,
    factor: DMatrix<f64>,
}

impl DiagPlusLowRank {
    pub fn new(d: Vec<f64>, factor: DMatrix<f64>) -> Result<Self, OperatorError> {
        if factor.nrows() != d.len() {
            return Err(OperatorError::DimensionMismatch { expected: d.len(), actual: factor.nrows() });
        }
        if factor.ncols() > d.len() {
            return Err(OperatorError::InvalidData("low-rank factor has more columns than rows"));
        }
        Ok(DiagPlusLowRank { d, factor })
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.d
    }
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = &self.factor * self.factor.transpose();
        for (i, di) in self.d.iter().enumerate() {
            m[(i, i)] += di;
        }
        m
    }
}

impl LinearOperator for DiagPlusLowRank {
    fn input_dim(&self) -> usize {
        self.d.len()
    }
    fn output_dim(&self) -> usize {
        self.d.len()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let k = self.factor.ncols();
        let mut t = vec![0.0; k];
        LinearOperator::apply_adjoint_into(&self.factor, x, &mut t).expect("dense adjoint");
        LinearOperator::apply_into(&self.factor, &t, y);
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.d) {
            *yi += di * xi;
        }
    }
    fn has_adjoint(&self) -> bool {
        true
    }
    fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
        self.apply_into(u, v);
        Ok(())
    }
}

/// Vertical concatenation `[A_1; A_2; ...]` of operators sharing an input space.
pub struct Stacked {
    parts: Vec<SharedOperator>,
    offsets: Vec<usize>,
    input_dim: usize,
}

impl Stacked {
    pub fn parts(&self) -> &[SharedOperator] {
        &self.parts
    }
}

pub fn stack_vertical(parts: Vec<SharedOperator>) -> Result<Stacked, OperatorError> {
    let first = parts.first().ok_or(OperatorError::EmptyStack)?;
    let input_dim = first.input_dim();
    let mut offsets = Vec::with_capacity(parts.len() + 1);
    offsets.push(0);
    for p in &parts {
        if p.input_dim() != input_dim {
            return Err(OperatorError::StackMismatch { expected: input_dim, actual: p.input_dim() });
        }
        offsets.push(offsets.last().unwrap() + p.output_dim());
    }
    Ok(Stacked { parts, offsets, input_dim })
}

impl LinearOperator for Stacked {
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (p, w) in self.parts.iter().zip(self.offsets.windows(2)) {
            p.apply_into(x, &mut y[w[0]..w[1]]);
        }
    }
    fn has_adjoint(&self) -> bool {
        self.parts.iter().all(|p| p.has_adjoint())
    }
    fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
        v.fill(0.0);
        let mut part = vec![0.0; self.input_dim];
        for (p, w) in self.parts.iter().zip(self.offsets.windows(2)) {
            p.apply_adjoint_into(&u[w[0]..w[1]], &mut part)?;
            crate::linalg::axpy(1.0, &part, v);
        }
        Ok(())
    }
}

type ApplyFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Operator defined by closures, for user-supplied structure.
pub struct FnOperator {
    rows: usize,
    cols: usize,
    forward: Box<ApplyFn>,
    adjoint: Option<Box<ApplyFn>>,
}

impl FnOperator {
    pub fn new<F>(rows: usize, cols: usize, forward: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        FnOperator { rows, cols, forward: Box::new(forward), adjoint: None }
    }

    pub fn with_adjoint<G>(mut self, adjoint: G) -> Self
    where
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.adjoint = Some(Box::new(adjoint));
        self
    }
}

impl LinearOperator for FnOperator {
    fn input_dim(&self) -> usize {
        self.cols
    }
    fn output_dim(&self) -> usize {
        self.rows
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (self.forward)(x, y)
    }
    fn has_adjoint(&self) -> bool {
        self.adjoint.is_some()
    }
    fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
        match &self.adjoint {
            Some(f) => {
                f(u, v);
                Ok(())
            }
            None => Err(OperatorError::AdjointUnsupported),
        }
    }
}

/// Hessian of a quadratic: a fixed symmetric operator, `update` is a no-op.
#[derive(Clone)]
pub struct ConstantHessian {
    op: SharedOperator,
}

impl ConstantHessian {
    pub fn new(op: SharedOperator) -> Self {
        ConstantHessian { op }
    }
}

impl LinearOperator for ConstantHessian {
    fn input_dim(&self) -> usize {
        self.op.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.op.output_dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply_into(x, y)
    }
    fn has_adjoint(&self) -> bool {
        true
    }
    fn apply_adjoint_into(&self, u: &[f64], v: &mut [f64]) -> Result<(), OperatorError> {
        self.op.apply_into(u, v);
        Ok(())
    }
}

impl HessianOperator for ConstantHessian {
    fn update(&mut self, _x: &[f64]) {}
    fn is_constant(&self) -> bool {
        true
    }
}

/// Materializes an operator column by column (tests and small problems).
pub fn to_dense(op: &dyn LinearOperator) -> DMatrix<f64> {
    let (m, n) = (op.output_dim(), op.input_dim());
    let mut out = DMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        out.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    out
}
