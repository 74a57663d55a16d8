//! Proximal operators and box geometry.

use alloc::vec::Vec;

use num_traits::Float;
use thiserror::Error;

/// Default bisection tolerance for [`simplex_project`].
pub const SIMPLEX_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoxError {
    #[error("lower and upper bounds differ in length: {lower} vs {upper}")]
    LengthMismatch { lower: usize, upper: usize },
    #[error("empty interval at index {index}: [{lower}, {upper}]")]
    EmptyInterval { index: usize, lower: f64, upper: f64 },
    #[error("NaN bound at index {0}")]
    NanBound(usize),
}

/// Hyperrectangle `{ z : l <= z <= u }`; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperrectangle {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Hyperrectangle {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, BoxError> {
        if lower.len() != upper.len() {
            return Err(BoxError::LengthMismatch { lower: lower.len(), upper: upper.len() });
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() {
                return Err(BoxError::NanBound(i));
            }
            if l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(BoxError::EmptyInterval { index: i, lower: l, upper: u });
            }
        }
        Ok(Hyperrectangle { lower, upper })
    }

    /// `[lo, hi]^n`
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self, BoxError> {
        Self::new(alloc::vec![lo; n], alloc::vec![hi; n])
    }

    pub fn free(n: usize) -> Self {
        Hyperrectangle { lower: alloc::vec![f64::NEG_INFINITY; n], upper: alloc::vec![f64::INFINITY; n] }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }
    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&zi, (&l, &u))| zi >= l - tol && zi <= u + tol)
    }

    pub fn project_into(&self, v: &[f64], out: &mut [f64]) {
        for ((o, &vi), (&l, &u)) in out.iter_mut().zip(v).zip(self.lower.iter().zip(&self.upper)) {
            *o = vi.max(l).min(u);
        }
    }
}

/// `sign(v_i) max(|v_i| - kappa, 0)`, the prox of `kappa ||.||_1`.
pub fn soft_threshold(v: &[f64], kappa: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    soft_threshold_in_place(&mut out, kappa);
    out
}

pub fn soft_threshold_in_place(v: &mut [f64], kappa: f64) {
    for vi in v {
        *vi = if *vi > kappa {
            *vi - kappa
        } else if *vi < -kappa {
            *vi + kappa
        } else {
            0.0
        };
    }
}

/// Elementwise clamp onto the box.
pub fn box_project(v: &[f64], bx: &Hyperrectangle) -> Vec<f64> {
    let mut out = alloc::vec![0.0; v.len()];
    bx.project_into(v, &mut out);
    out
}

fn simplex_excess(v: &[f64], nu: f64) -> f64 {
    v.iter().map(|&x| (x - nu).max(0.0)).sum::<f64>() - 1.0
}

/// Euclidean projection onto `{ z >= 0, 1^T z = 1 }`.
///
/// Bisects on the threshold `nu` in `sum (v_i - nu)_+ = 1` to `tol`, then
/// snaps `nu` to the closed form on the detected support.
pub fn simplex_project(v: &[f64], tol: f64) -> Vec<f64> {
    let mut out = alloc::vec![0.0; v.len()];
    simplex_project_into(v, tol, &mut out);
    out
}

pub fn simplex_project_into(v: &[f64], tol: f64, out: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let tol = if tol > 0.0 { tol } else { SIMPLEX_TOL };
    let vmax = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // excess(lo) >= 0 since (vmax - lo) >= 1; excess(hi) = -1
    let mut lo = vmax - 1.0;
    let mut hi = vmax;
    let mut nu = 0.5 * (lo + hi);
    for _ in 0..200 {
        nu = 0.5 * (lo + hi);
        let e = simplex_excess(v, nu);
        if e.abs() <= tol {
            break;
        }
        if e > 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        if hi - lo <= f64::epsilon() * (1.0 + nu.abs()) {
            break;
        }
    }
    let (sum, count) = v
        .iter()
        .filter(|&&x| x > nu)
        .fold((0.0, 0usize), |(s, c), &x| (s + x, c + 1));
    if count > 0 {
        let exact = (sum - 1.0) / count as f64;
        // keep the snapped threshold only if it leaves the support unchanged
        let same_support = v.iter().all(|&x| (x > nu) == (x > exact));
        if same_support {
            nu = exact;
        }
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - nu).max(0.0);
    }
}

/// Support function `sup_{z in box} y^T z`; `+inf` when unbounded in the
/// direction `y`. Zero coordinates of `y` contribute zero even when the
/// matching bound is infinite.
pub fn box_support(y: &[f64], bx: &Hyperrectangle) -> f64 {
    let mut s = 0.0;
    for (&yi, (&l, &u)) in y.iter().zip(bx.lower.iter().zip(&bx.upper)) {
        if yi > 0.0 {
            if u == f64::INFINITY {
                return f64::INFINITY;
            }
            s += u * yi;
        } else if yi < 0.0 {
            if l == f64::NEG_INFINITY {
                return f64::INFINITY;
            }
            s += l * yi;
        }
    }
    s
}

/// Euclidean distance from `y` to the recession cone of the box.
pub fn box_recession_distance(y: &[f64], bx: &Hyperrectangle) -> f64 {
    let mut acc = 0.0;
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    for (&yi, (&l, &u)) in y.iter().zip(bx.lower.iter().zip(&bx.upper)) {
        let lo = if l == f64::NEG_INFINITY { f64::NEG_INFINITY } else { 0.0 };
        let hi = if u == f64::INFINITY { f64::INFINITY } else { 0.0 };
        let d = (yi - yi.max(lo).min(hi)) / scale;
        acc += d * d;
    }
    scale * acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[2.0, -0.5, 0.5], 1.0), vec![1.0, 0.0, 0.0]);
        assert_eq!(soft_threshold(&[2.0, -0.5], 0.0), vec![2.0, -0.5]);
        assert_eq!(soft_threshold(&[-3.0], 1.0), vec![-2.0]);
    }

    #[test]
    fn box_examples() {
        let b = Hyperrectangle::uniform(3, 0.0, 1.0).unwrap();
        assert_eq!(box_project(&[-1.0, 0.5, 2.0], &b), vec![0.0, 0.5, 1.0]);
        let eq = Hyperrectangle::uniform(2, 3.0, 3.0).unwrap();
        assert_eq!(box_project(&[-7.0, 9.0], &eq), vec![3.0, 3.0]);
        assert_eq!(box_project(&[-7.0, 9.0], &Hyperrectangle::free(2)), vec![-7.0, 9.0]);
    }

    #[test]
    fn invalid_boxes() {
        assert!(Hyperrectangle::new(vec![1.0], vec![0.0]).is_err());
        assert!(Hyperrectangle::new(vec![0.0], vec![]).is_err());
        assert!(Hyperrectangle::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(Hyperrectangle::new(vec![INF], vec![INF]).is_err());
    }

    #[test]
    fn simplex_examples() {
        let p = simplex_project(&[0.5, 0.5], 1e-8);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        let p = simplex_project(&[2.0, 0.0], 1e-8);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
        let p = simplex_project(&[-5.0], 1e-8);
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn support_examples() {
        let b = Hyperrectangle::uniform(2, 0.0, 1.0).unwrap();
        assert_eq!(box_support(&[1.0, -1.0], &b), 1.0);
        let b = Hyperrectangle::uniform(1, -1.0, 2.0).unwrap();
        assert_eq!(box_support(&[-3.0], &b), 3.0);
        let b = Hyperrectangle::new(vec![0.0], vec![INF]).unwrap();
        assert_eq!(box_support(&[1.0], &b), INF);
        assert_eq!(box_support(&[0.0], &b), 0.0);
        assert_eq!(box_support(&[-2.0], &b), 0.0);
    }

    #[test]
    fn recession_examples() {
        let b = Hyperrectangle::uniform(2, -1.0, 1.0).unwrap();
        assert!((box_recession_distance(&[1.0, -2.0], &b) - 5f64.sqrt()).abs() < 1e-15);
        let b = Hyperrectangle::new(vec![0.0; 2], vec![INF; 2]).unwrap();
        assert_eq!(box_recession_distance(&[1.0, -2.0], &b), 2.0);
        assert_eq!(box_recession_distance(&[1.0, -2.0], &Hyperrectangle::free(2)), 0.0);
    }
}
