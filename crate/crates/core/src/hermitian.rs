//! Complex-matrix foundation.
//!
//! Validated newtypes for Hermitian, positive semi-definite, unitary and
//! contractive matrices, the sorted eigendecomposition everything else is
//! built on, functional calculus, spectral dominance with its constructive
//! realizations, and seeded random sampling.
//!
//! All tolerances are relative to `max(1, ‖X‖_max)` of the matrix under test.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Numerical tolerances shared by the whole toolkit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub hermitian: f64,
    pub eig: f64,
    pub witness: f64,
    pub psd: f64,
    pub rank_cutoff: f64,
    pub unitary: f64,
    pub contraction: f64,
    pub dominance: f64,
    pub majorization: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        TOL
    }
}

/// Default tolerances.
pub const TOL: Tolerances = Tolerances {
    hermitian: 1e-12,
    eig: 1e-10,
    witness: 1e-9,
    psd: 1e-9,
    rank_cutoff: 1e-10,
    unitary: 1e-9,
    contraction: 1e-9,
    dominance: 1e-9,
    majorization: 1e-9,
};

/// `max(1, ‖m‖_max)`.
pub fn scale(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(1.0, f64::max)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(values[i], 0.0) } else { ZERO })
}

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    CMatrix::from_fn(rows, cols, |i, j| Complex64::new(data[i * cols + j], 0.0))
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd(m).singular_values.first().copied().unwrap_or(0.0)
}

/// `M = U Diag(σ) V_t` with `σ` non-increasing and `U`, `V_t` unitary.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v_t: CMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> CMatrix {
        &self.u * diag_real(&self.singular_values) * &self.v_t
    }
}

/// One-sided Jacobi SVD of a square matrix.
///
/// nalgebra 0.35's complex bidiagonal SVD can return factors that
/// reconstruct the input only to about 1e-2, so it is not used.
pub fn svd(m: &CMatrix) -> Svd {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "svd expects a square matrix");
    let mut a = m.clone();
    let mut v = identity(n);
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = a.column(p).iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = a.column(q).iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = a.column(p).iter().zip(a.column(q).iter()).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let e = gamma / g;
                for mat in [&mut a, &mut v] {
                    for row in 0..n {
                        let (xp, xq) = (mat[(row, p)], mat[(row, q)]);
                        mat[(row, p)] = xp * c - xq * e.conj() * s;
                        mat[(row, q)] = xp * e * s + xq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let top = norms.iter().cloned().fold(0.0, f64::max);
    let mut u = CMatrix::zeros(n, n);
    let mut vs = CMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let mut filled = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        vs.set_column(k, &v.column(j));
        sigma.push(norms[j]);
        if norms[j] > top * f64::EPSILON && norms[j] > 0.0 {
            u.set_column(k, &a.column(j).map(|z| z / norms[j]));
            filled.push(k);
        }
    }
    // complete U with an orthonormal basis of the left null space
    let mut candidate = 0;
    for k in 0..n {
        if filled.contains(&k) {
            continue;
        }
        loop {
            let mut x = CMatrix::zeros(n, 1);
            x[(candidate % n, 0)] = ONE;
            candidate += 1;
            for _ in 0..2 {
                for &f in &filled {
                    let col = u.column(f).into_owned();
                    let proj = col.adjoint() * &x;
                    x -= col * proj[(0, 0)];
                }
            }
            let norm = x.norm();
            if norm > 0.5 {
                u.set_column(k, &x.column(0).map(|z| z / norm));
                filled.push(k);
                break;
            }
        }
    }
    Svd { u, singular_values: sigma, v_t: vs.adjoint() }
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.nrows() == 0 {
        return Err(Error::EmptyOrder);
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(m.nrows())
}

/// Self-adjoint matrix. The stored matrix is exactly Hermitian: construction
/// symmetrizes after the tolerance check.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMatrix);

impl Hermitian {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let dev = max_abs_diff(&m, &m.adjoint());
        if dev > TOL.hermitian * scale(&m) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::symmetrized(m))
    }

    /// Projects onto the Hermitian part without checking.
    pub fn symmetrized(m: CMatrix) -> Self {
        let adj = m.adjoint();
        Self((m + adj).scale(0.5))
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        Self(diag_real(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        trace(&self.0).re
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.0.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn spectrum(&self) -> Spectrum {
        eig_sorted(self).0
    }

    /// `X* A X`, re-symmetrized.
    pub fn congruence(&self, x: &CMatrix) -> Hermitian {
        Hermitian::symmetrized(x.adjoint() * &self.0 * x)
    }

    pub fn add(&self, other: &Hermitian) -> Hermitian {
        Hermitian(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Hermitian) -> Hermitian {
        Hermitian(&self.0 - &other.0)
    }

    pub fn scaled(&self, s: f64) -> Hermitian {
        Hermitian(self.0.map(|z| z * s))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let s = self.spectrum();
        s.values()[s.len() - 1]
    }
}

/// Positive semi-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd(Hermitian);

impl Psd {
    pub fn new(h: Hermitian) -> Result<Self> {
        let lmin = h.min_eigenvalue();
        if lmin < -TOL.psd * scale(h.matrix()) {
            return Err(Error::NotPsd(lmin));
        }
        Ok(Self(h))
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(Hermitian::new(m)?)
    }

    pub fn from_diagonal(values: &[f64]) -> Result<Self> {
        Self::new(Hermitian::from_diagonal(values))
    }

    pub fn hermitian(&self) -> &Hermitian {
        &self.0
    }

    pub fn matrix(&self) -> &CMatrix {
        self.0.matrix()
    }

    pub fn order(&self) -> usize {
        self.0.order()
    }

    pub fn into_hermitian(self) -> Hermitian {
        self.0
    }

    /// Principal square root; slightly negative eigenvalues are clamped to 0.
    pub fn sqrt(&self) -> Hermitian {
        apply_real(&self.0, |t| t.max(0.0).sqrt())
    }

    /// Moore-Penrose inverse of the square root, eigenvalues below
    /// `rank_cutoff · scale` treated as zero.
    pub fn pinv_sqrt(&self) -> Hermitian {
        let cut = TOL.rank_cutoff * scale(self.matrix());
        apply_real(&self.0, |t| if t > cut { 1.0 / t.sqrt() } else { 0.0 })
    }
}

/// Unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary(CMatrix);

impl Unitary {
    pub fn new(m: CMatrix) -> Result<Self> {
        let n = check_square(&m)?;
        let dev = max_abs_diff(&(m.adjoint() * &m), &identity(n));
        if dev > TOL.unitary {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(identity(n))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn adjoint(&self) -> Unitary {
        Unitary(self.0.adjoint())
    }

    pub fn compose(&self, other: &Unitary) -> Unitary {
        Unitary(&self.0 * &other.0)
    }

    /// `U* A U`.
    pub fn conjugate(&self, a: &Hermitian) -> Hermitian {
        a.congruence(&self.0)
    }
}

/// Matrix of operator norm at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct Contraction(CMatrix);

impl Contraction {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let norm = operator_norm(&m);
        if norm > 1.0 + TOL.contraction {
            return Err(Error::NotContraction(norm));
        }
        Ok(Self(m))
    }

    /// Clips singular values into `[0, 1]`.
    pub fn clipped(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let Svd { u, singular_values, v_t } = svd(&m);
        let s: Vec<f64> = singular_values.iter().map(|s| s.min(1.0)).collect();
        Ok(Self(u * diag_real(&s) * v_t))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn norm(&self) -> f64 {
        operator_norm(&self.0)
    }
}

impl From<Unitary> for Contraction {
    fn from(u: Unitary) -> Self {
        Contraction(u.0)
    }
}

/// Eigenvalues in non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    /// Sorts descending.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Appends zeros and re-sorts.
    pub fn padded(&self, n: usize) -> Spectrum {
        let mut v = self.0.clone();
        v.resize(n, 0.0);
        Spectrum::new(v)
    }

    pub fn shifted(&self, alpha: f64) -> Spectrum {
        Spectrum(self.0.iter().map(|x| x + alpha).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Sorted eigendecomposition `A = U Diag(λ) U*`.
///
/// Eigenvalues are sorted non-increasingly with a stable sort over the
/// solver's order, and each eigenvector is rotated so that its first entry of
/// largest modulus is real and non-negative.
pub fn eig_sorted(a: &Hermitian) -> (Spectrum, Unitary) {
    let n = a.order();
    let eig = SymmetricEigen::new(a.0.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut u = CMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(src);
        let vmax = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let pivot = v.iter().position(|z| z.norm() >= vmax * (1.0 - 1e-12)).unwrap_or(0);
        let p = v[pivot];
        let phase = if p.norm() > 0.0 { p.conj() / p.norm() } else { ONE };
        for row in 0..n {
            u[(row, col)] = v[row] * phase;
        }
    }
    (Spectrum(values), Unitary(u))
}

/// Rebuilds `U Diag(λ) U*`.
pub fn reconstruct(values: &[f64], u: &CMatrix) -> Hermitian {
    let d = diag_real(values);
    Hermitian::symmetrized(u * d * u.adjoint())
}

fn apply_real(a: &Hermitian, f: impl Fn(f64) -> f64) -> Hermitian {
    let (s, u) = eig_sorted(a);
    let fv: Vec<f64> = s.values().iter().map(|&t| f(t)).collect();
    reconstruct(&fv, u.matrix())
}

/// Functional calculus `f(A) = U Diag(f(λ)) U*`.
pub fn apply_function(f: impl Fn(f64) -> f64, a: &Hermitian) -> Result<Hermitian> {
    let (s, u) = eig_sorted(a);
    let mut fv = Vec::with_capacity(s.len());
    for &t in s.values() {
        let v = f(t);
        if !v.is_finite() {
            return Err(Error::FunctionDomain(t));
        }
        fv.push(v);
    }
    Ok(reconstruct(&fv, u.matrix()))
}

/// `λ(B)_i ≥ λ(A)_i − tol` for every `i`.
pub fn spectrally_dominates(b: &Hermitian, a: &Hermitian) -> Result<bool> {
    Ok(dominance_violation(b, a)?.is_none())
}

fn dominance_violation(b: &Hermitian, a: &Hermitian) -> Result<Option<(usize, f64, f64)>> {
    if a.order() != b.order() {
        return Err(Error::DimensionMismatch { expected: b.order(), found: a.order() });
    }
    let tol = TOL.dominance * scale(a.matrix()).max(scale(b.matrix()));
    let (la, lb) = (a.spectrum(), b.spectrum());
    Ok(la
        .values()
        .iter()
        .zip(lb.values())
        .enumerate()
        .find(|(_, (x, y))| **y < **x - tol)
        .map(|(i, (x, y))| (i, *y, *x)))
}

/// A contraction `V` with `V* B V = A` whenever `A ≲ B`.
///
/// Aligns sorted eigenbases and scales mode `i` by `√(λ(A)_i / λ(B)_i)`,
/// zeroing modes where `λ(B)_i` falls below the rank cutoff.
pub fn realize_dominance_contraction(a: &Psd, b: &Psd) -> Result<Contraction> {
    if let Some((index, upper, lower)) = dominance_violation(b.hermitian(), a.hermitian())? {
        return Err(Error::DominanceViolated { index, upper, lower });
    }
    let (la, ua) = eig_sorted(a.hermitian());
    let (lb, ub) = eig_sorted(b.hermitian());
    let cut = TOL.rank_cutoff * scale(b.matrix());
    let s: Vec<Complex64> = la
        .values()
        .iter()
        .zip(lb.values())
        .map(|(&x, &y)| {
            let r = if y > cut { (x.max(0.0) / y).sqrt().min(1.0) } else { 0.0 };
            Complex64::new(r, 0.0)
        })
        .collect();
    let v = ub.matrix() * CMatrix::from_diagonal(&DVector::from_vec(s)) * ua.matrix().adjoint();
    Contraction::new(v)
}

/// A unitary `V` with `A ≤ V* C V` whenever `λ(A)_i ≤ λ(C)_i` for all `i`.
pub fn align_order(a: &Hermitian, c: &Hermitian) -> Result<Unitary> {
    if let Some((index, upper, lower)) = dominance_violation(c, a)? {
        return Err(Error::DominanceViolated { index, upper, lower });
    }
    let (_, ua) = eig_sorted(a);
    let (_, uc) = eig_sorted(c);
    Ok(Unitary(uc.matrix() * ua.matrix().adjoint()))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex_gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Haar unitary: QR of a complex Gaussian matrix with the diagonal of `R`
/// made positive.
pub fn sample_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let z = complex_gaussian(n, rng);
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn sample_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let z = complex_gaussian(n, rng);
    (&z + z.adjoint()).scale(0.5)
}

pub fn random_unitary(n: usize, seed: u64) -> Result<Unitary> {
    if n == 0 {
        return Err(Error::EmptyOrder);
    }
    Ok(Unitary(sample_unitary(n, &mut rng_from_seed(seed))))
}

/// Haar unitary times a diagonal of uniform `[0, 1]` singular values.
pub fn random_contraction(n: usize, seed: u64) -> Result<Contraction> {
    if n == 0 {
        return Err(Error::EmptyOrder);
    }
    let mut rng = rng_from_seed(seed);
    let u = sample_unitary(n, &mut rng);
    let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
    Ok(Contraction(u * diag_real(&s)))
}

/// Random Hermitian matrix; with `spectrum`, a Haar rotation of that diagonal.
pub fn random_hermitian(n: usize, seed: u64, spectrum: Option<&Spectrum>) -> Result<Hermitian> {
    if n == 0 {
        return Err(Error::EmptyOrder);
    }
    let mut rng = rng_from_seed(seed);
    match spectrum {
        Some(s) => {
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: s.len() });
            }
            let u = sample_unitary(n, &mut rng);
            Ok(reconstruct(s.values(), &u))
        }
        None => Ok(Hermitian::symmetrized(sample_hermitian(n, &mut rng))),
    }
}
