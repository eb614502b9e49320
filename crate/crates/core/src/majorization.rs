//! Vector (sub)majorization and the classical Schur-Horn constructor.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hermitian::{from_real, Hermitian, TOL};

/// First partial sum where `x` overtakes `y`: `(k, Σ_{i≤k} x↓, Σ_{i≤k} y↓)`
/// with `k` one-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialSumViolation {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
}

fn check_pair(y: &[f64], x: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), found: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

pub fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Partial-sum check for `x ≺_w y`, reporting the first failing prefix.
pub fn weak_majorization_violation(y: &[f64], x: &[f64]) -> Result<Option<PartialSumViolation>> {
    check_pair(y, x)?;
    let (xs, ys) = (sorted_desc(x), sorted_desc(y));
    let (mut sx, mut sy) = (0.0, 0.0);
    for k in 0..xs.len() {
        sx += xs[k];
        sy += ys[k];
        if sx > sy + TOL.majorization {
            return Ok(Some(PartialSumViolation { k: k + 1, lhs: sx, rhs: sy }));
        }
    }
    Ok(None)
}

/// `x ≺_w y`.
pub fn weak_majorizes(y: &[f64], x: &[f64]) -> Result<bool> {
    Ok(weak_majorization_violation(y, x)?.is_none())
}

/// `x ≺ y`: submajorization plus equal totals.
pub fn majorizes(y: &[f64], x: &[f64]) -> Result<bool> {
    Ok(majorization_violation(y, x)?.is_none())
}

/// Like [`weak_majorization_violation`], additionally reporting a total
/// mismatch as a violation at `k = n`.
pub fn majorization_violation(y: &[f64], x: &[f64]) -> Result<Option<PartialSumViolation>> {
    if let Some(v) = weak_majorization_violation(y, x)? {
        return Ok(Some(v));
    }
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    if (sx - sy).abs() > TOL.majorization {
        return Ok(Some(PartialSumViolation { k: x.len(), lhs: sx, rhs: sy }));
    }
    Ok(None)
}

/// Real symmetric matrix with main diagonal `x` and spectrum `y↓`.
///
/// Starts from `Diag(y↓)` and walks the T-transform chain from `y↓` down to
/// `x↓`: each step is a Givens rotation in a plane whose 2×2 principal block
/// is still diagonal, and it pins at least one diagonal entry for good.
pub fn schur_horn_construct(x: &[f64], y: &[f64]) -> Result<Hermitian> {
    if let Some(v) = majorization_violation(y, x)? {
        return Err(Error::NotMajorized(format!(
            "partial sum {} of x is {} against {} for y",
            v.k, v.lhs, v.rhs
        )));
    }
    let n = x.len();
    if n == 0 {
        return Err(Error::EmptyOrder);
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| x[b].total_cmp(&x[a]));
    let target: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
    let mut d = sorted_desc(y);
    let scale = d.iter().chain(&target).fold(1.0f64, |m, v| m.max(v.abs()));
    let eps = 1e-13 * scale;

    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = d[i];
    }
    for _ in 0..2 * n {
        let Some(j) = (0..n).rev().find(|&i| d[i] > target[i] + eps) else { break };
        let Some(k) = (j + 1..n).find(|&i| d[i] < target[i] - eps) else { break };
        let (hi, lo) = (d[j], d[k]);
        let delta = (hi - target[j]).min(target[k] - lo);
        let s2 = (delta / (hi - lo)).clamp(0.0, 1.0);
        let (s, c) = (s2.sqrt(), (1.0 - s2).sqrt());
        // A <- Gᵀ A G with G = [[c, s], [-s, c]] in the (j, k) plane
        for r in 0..n {
            let (aj, ak) = (a[r * n + j], a[r * n + k]);
            a[r * n + j] = c * aj - s * ak;
            a[r * n + k] = s * aj + c * ak;
        }
        for col in 0..n {
            let (aj, ak) = (a[j * n + col], a[k * n + col]);
            a[j * n + col] = c * aj - s * ak;
            a[k * n + col] = s * aj + c * ak;
        }
        if hi - target[j] <= target[k] - lo {
            d[j] = target[j];
            d[k] = lo + delta;
        } else {
            d[k] = target[k];
            d[j] = hi - delta;
        }
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[perm[i] * n + perm[j]] = a[i * n + j];
        }
    }
    Ok(Hermitian::symmetrized(from_real(n, n, &out)))
}

/// `tr f(A) ≤ tr f(B) + tol` for every supplied `f`.
///
/// A necessary condition for `A ≺ B` when every `f` is convex; a finite
/// family of functions cannot decide majorization on its own.
pub fn convex_trace_test(a: &Hermitian, b: &Hermitian, fs: &[&dyn Fn(f64) -> f64]) -> Result<bool> {
    if a.order() != b.order() {
        return Err(Error::DimensionMismatch { expected: b.order(), found: a.order() });
    }
    let (la, lb) = (a.spectrum(), b.spectrum());
    for f in fs {
        let mut ta = 0.0;
        for &t in la.values() {
            let v = f(t);
            if !v.is_finite() {
                return Err(Error::FunctionDomain(t));
            }
            ta += v;
        }
        let mut tb = 0.0;
        for &t in lb.values() {
            let v = f(t);
            if !v.is_finite() {
                return Err(Error::FunctionDomain(t));
            }
            tb += v;
        }
        if ta > tb + TOL.majorization * ta.abs().max(tb.abs()).max(1.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Applies `steps` random T-transforms `t·I + (1−t)·Q_{ij}` to `y`; the
/// result is majorized by `y` by construction.
pub fn random_t_transform_image<R: Rng + ?Sized>(y: &[f64], steps: usize, rng: &mut R) -> Vec<f64> {
    let mut x = y.to_vec();
    let n = x.len();
    if n < 2 {
        return x;
    }
    for _ in 0..steps {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let t: f64 = rng.random_range(0.0..=1.0);
        let (xi, xj) = (x[i], x[j]);
        x[i] = t * xi + (1.0 - t) * xj;
        x[j] = t * xj + (1.0 - t) * xi;
    }
    x
}
