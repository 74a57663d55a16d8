//! Seeded synthetic problem data. Every generator is bit-deterministic for a
//! given seed.
//!
//! Fractional counts (nonzeros, outliers) are rounded half to even, so
//! `0.05 * 50 = 2.5` becomes 2.

use nalgebra::{DMatrix, DVector};
use nysadmm_core::problems::reformulations::{bounded_least_squares, PortfolioData};
use nysadmm_core::operators::CsrMatrix;
use nysadmm_core::QpProblem;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn round_half_even(x: f64) -> usize {
    x.round_ties_even() as usize
}

fn gaussian_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // draw row by row so the stream does not depend on storage order
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = r.sample(StandardNormal);
        }
    }
    m
}

fn gaussian_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

/// Sparse ground truth with `round(frac * n)` standard-normal entries.
fn sparse_truth(r: &mut ChaCha8Rng, n: usize, frac: f64) -> Vec<f64> {
    let k = round_half_even(frac * n as f64).min(n);
    let mut idx = sample(r, n, k).into_vec();
    idx.sort_unstable();
    let mut x = vec![0.0; n];
    for i in idx {
        x[i] = r.sample(StandardNormal);
    }
    x
}

fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(x)).as_slice().to_vec()
}

/// `||A^T b||_inf`
pub fn lambda_max(a: &DMatrix<f64>, b: &[f64]) -> f64 {
    let atb = a.transpose() * DVector::from_column_slice(b);
    atb.amax()
}

/// Regression data `b = A x_true + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub x_true: Vec<f64>,
    /// `0.1 ||A^T b||_inf`
    pub lambda1: f64,
}

/// Gaussian `A` (`samples x n`), 10% sparse truth, noise `0.1 N(0, 1)`.
pub fn lasso_data(samples: usize, n: usize, seed: u64) -> RegressionData {
    let mut r = rng(seed);
    let a = gaussian_matrix(&mut r, samples, n);
    regression_from(a, &mut r)
}

fn regression_from(a: DMatrix<f64>, r: &mut ChaCha8Rng) -> RegressionData {
    let x_true = sparse_truth(r, a.ncols(), 0.1);
    let mut b = mat_vec(&a, &x_true);
    for bi in &mut b {
        *bi += 0.1 * r.sample::<f64, _>(StandardNormal);
    }
    let lambda1 = 0.1 * lambda_max(&a, &b);
    RegressionData { a, b, x_true, lambda1 }
}

/// Approximately low-rank dense matrix `U diag(s) V^T + 0.01 G` with
/// singular values `s_i = 10 / i`; stands in for dense real data.
pub fn low_rank_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let k = rows.min(cols);
    let u = gaussian_matrix(&mut r, rows, k).qr().q();
    let v = gaussian_matrix(&mut r, cols, k).qr().q();
    let s = DMatrix::from_diagonal(&DVector::from_fn(k, |i, _| 10.0 / (i + 1) as f64));
    let noise = gaussian_matrix(&mut r, rows, cols);
    &u * s * v.transpose() + noise * 0.01
}

/// Low-rank regression instance on [`low_rank_matrix`] data.
pub fn low_rank_regression(samples: usize, n: usize, seed: u64) -> RegressionData {
    let a = low_rank_matrix(samples, n, seed);
    let mut r = rng(seed ^ 0x51ed);
    regression_from(a, &mut r)
}

/// Logistic data with rows already scaled by `-label`, and
/// `lambda1 = 0.05 ||A^T 1||_inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticData {
    pub a: DMatrix<f64>,
    pub labels: Vec<f64>,
    pub lambda1: f64,
}

pub fn logistic_data(samples: usize, n: usize, seed: u64) -> LogisticData {
    let mut r = rng(seed);
    let feats = gaussian_matrix(&mut r, samples, n);
    let w = sparse_truth(&mut r, n, 0.1);
    let margin = mat_vec(&feats, &w);
    let labels: Vec<f64> = margin
        .iter()
        .map(|m| {
            let noisy = m + 0.5 * r.sample::<f64, _>(StandardNormal);
            if noisy >= 0.0 { 1.0 } else { -1.0 }
        })
        .collect();
    logistic_from_labels(&feats, &labels)
}

/// Folds labels in `{-1, 1}` into the rows: `a_i = -label_i * feat_i`.
pub fn logistic_from_labels(feats: &DMatrix<f64>, labels: &[f64]) -> LogisticData {
    let a = DMatrix::from_fn(feats.nrows(), feats.ncols(), |i, j| -labels[i] * feats[(i, j)]);
    let ones = vec![1.0; a.nrows()];
    let lambda1 = 0.05 * lambda_max(&a, &ones);
    LogisticData { a, labels: labels.to_vec(), lambda1 }
}

/// Huber fitting data: `n` features, `n / 2` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct HuberData {
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    /// `b` before the outlier shifts.
    pub clean_b: Vec<f64>,
    pub x_true: Vec<f64>,
    pub outliers: Vec<usize>,
    pub lambda1: f64,
}

/// Columns of `A` have zero mean and unit norm; `x_true` has 10% nonzeros;
/// `b = A x_true + 0.1 v` and 5% of the entries are shifted by `+-10`.
///
/// # Panics
///
/// If `n` is odd or below 4.
pub fn huber_data(n: usize, seed: u64) -> HuberData {
    assert!(n >= 4 && n % 2 == 0, "n must be even and at least 4");
    let samples = n / 2;
    let mut r = rng(seed);
    let mut a = gaussian_matrix(&mut r, samples, n);
    for mut col in a.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        col /= norm;
    }
    let x_true = sparse_truth(&mut r, n, 0.1);
    let mut clean_b = mat_vec(&a, &x_true);
    for bi in &mut clean_b {
        *bi += 0.1 * r.sample::<f64, _>(StandardNormal);
    }
    let k = round_half_even(0.05 * samples as f64).min(samples);
    let mut outliers = sample(&mut r, samples, k).into_vec();
    outliers.sort_unstable();
    let mut b = clean_b.clone();
    for &i in &outliers {
        b[i] += if r.random_bool(0.5) { 10.0 } else { -10.0 };
    }
    let lambda1 = 0.1 * lambda_max(&a, &b);
    HuberData { a, b, clean_b, x_true, outliers, lambda1 }
}

/// `n = 100 k` assets; `D_ii ~ U[0, sqrt k]`; `F` is `n x k` with each entry
/// standard normal with probability 1/2 and zero otherwise; `mu ~ N(0, 1)`;
/// `gamma = 1`.
pub fn portfolio_data(k: usize, seed: u64) -> PortfolioData {
    assert!(k >= 1, "k must be positive");
    let n = 100 * k;
    let mut r = rng(seed);
    let hi = (k as f64).sqrt();
    let d: Vec<f64> = (0..n).map(|_| r.random_range(0.0..hi)).collect();
    let mut f = DMatrix::zeros(n, k);
    for i in 0..n {
        for j in 0..k {
            let keep = r.random_bool(0.5);
            let v: f64 = r.sample(StandardNormal);
            if keep {
                f[(i, j)] = v;
            }
        }
    }
    let mu = gaussian_vec(&mut r, n);
    PortfolioData { d, f, mu, gamma: 1.0 }
}

/// Bounded least squares instance: Gaussian `A` with `samples` rows and
/// `samples / 2` columns, Gaussian `b`, box `[0, 1]^n`.
#[derive(Clone)]
pub struct BoundedLsData {
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub qp: QpProblem,
}

impl BoundedLsData {
    /// `1/2 ||A x - b||^2`
    pub fn least_squares(&self, x: &[f64]) -> f64 {
        let r = &self.a * DVector::from_column_slice(x) - DVector::from_column_slice(&self.b);
        0.5 * r.norm_squared()
    }
}

pub fn bounded_ls_data(samples: usize, seed: u64) -> BoundedLsData {
    assert!(samples >= 2 && samples % 2 == 0, "sample count must be even");
    let mut r = rng(seed);
    let a = gaussian_matrix(&mut r, samples, samples / 2);
    let b = gaussian_vec(&mut r, samples);
    let qp = bounded_least_squares(&a, &b).expect("consistent dimensions");
    BoundedLsData { a, b, qp }
}

/// `Q diag(lambda) Q^T + shift I` with a Haar-random `Q`.
pub fn psd_with_spectrum(spectrum: &[f64], shift: f64, seed: u64) -> DMatrix<f64> {
    let n = spectrum.len();
    let mut r = rng(seed);
    let q = gaussian_matrix(&mut r, n, n).qr().q();
    let mut a = &q * DMatrix::from_diagonal(&DVector::from_column_slice(spectrum)) * q.transpose();
    a = (&a + a.transpose()) * 0.5;
    for i in 0..n {
        a[(i, i)] += shift;
    }
    a
}

/// Random sparse matrix with roughly `density * rows * cols` Gaussian entries.
pub fn sparse_gaussian(rows: usize, cols: usize, density: f64, seed: u64) -> CsrMatrix {
    let mut r = rng(seed);
    let mut t = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            if r.random_bool(density) {
                t.push((i, j, r.sample(StandardNormal)));
            }
        }
    }
    CsrMatrix::from_triplets(rows, cols, &t).expect("indices in range")
}
