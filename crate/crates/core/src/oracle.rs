//! Numeric realization search over unitary orbits.
//!
//! Levenberg-Marquardt on products of unitary groups: tangent steps are
//! skew-Hermitian, retracted by the Cayley transform. Every reported witness
//! is rebuilt and checked from scratch.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::algebra::ProjectionSystem;
use crate::decision::{Certificate, Decision, Verdict};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::hermitian::{
    diag_real, eig_sorted, frobenius, identity, rng_from_seed, sample_unitary, CMatrix, Contraction, Hermitian,
    Spectrum, Unitary, ONE, ZERO,
};
use crate::klyachko::{dual_subset, subset_sum};

/// Restarts run in fixed-size batches so results do not depend on threads.
const BATCH: usize = 8;
const STALL_WINDOW: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBudget {
    pub restarts: usize,
    pub iterations: usize,
    /// Initial damping relative to the largest diagonal entry of `JᵀJ`.
    pub initial_damping: f64,
    /// Damping beyond which a restart is abandoned.
    pub max_damping: f64,
    pub seed: u64,
    pub success_tol: f64,
    pub exec: Execution,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            restarts: 64,
            iterations: 2000,
            initial_damping: 1e-3,
            max_damping: 1e16,
            seed: 0,
            success_tol: 1e-8,
            exec: Execution::Parallel,
        }
    }
}

impl OracleBudget {
    fn check(&self) -> Result<()> {
        let ok = self.restarts > 0
            && self.iterations > 0
            && self.initial_damping > 0.0
            && self.max_damping > self.initial_damping
            && self.success_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!("budget entries must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleStatus {
    WitnessFound,
    Exhausted,
}

#[derive(Debug, Clone)]
pub enum Witness {
    /// `U₁, …, U_m` with `Σ U_i Diag(λⁱ) U_i* = Diag(λ⁰)`.
    Unitaries(Vec<Unitary>),
    /// `X` realizing the block targets through `X*BX`.
    Unitary(Unitary),
    Contraction(Contraction),
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub status: OracleStatus,
    pub witness: Option<Witness>,
    /// Best verified residual over all restarts.
    pub residual: f64,
    /// Restarts actually run.
    pub restarts_used: usize,
}

impl OracleOutcome {
    pub fn found(&self) -> bool {
        self.status == OracleStatus::WitnessFound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressionMode {
    Unitary,
    Contractive,
}

#[derive(Clone, Copy)]
enum Kind {
    Diag,
    Re,
    Im,
}

/// Basis element of the skew-Hermitian matrices: `i·E_kk`, `E_kl − E_lk`
/// or `i(E_kl + E_lk)` for `k < l`.
#[derive(Clone, Copy)]
struct Skew {
    k: usize,
    l: usize,
    kind: Kind,
}

fn skew_basis(n: usize) -> Vec<Skew> {
    let mut out: Vec<Skew> = (0..n).map(|k| Skew { k, l: k, kind: Kind::Diag }).collect();
    for k in 0..n {
        for l in k + 1..n {
            out.push(Skew { k, l, kind: Kind::Re });
            out.push(Skew { k, l, kind: Kind::Im });
        }
    }
    out
}

const I: Complex64 = Complex64::new(0.0, 1.0);

impl Skew {
    /// `(row, col, value)` entries.
    fn entries(self) -> [(usize, usize, Complex64); 2] {
        match self.kind {
            Kind::Diag => [(self.k, self.k, I), (self.k, self.k, ZERO)],
            Kind::Re => [(self.k, self.l, ONE), (self.l, self.k, -ONE)],
            Kind::Im => [(self.k, self.l, I), (self.l, self.k, I)],
        }
    }

    /// `[self, a] = self·a − a·self`.
    fn commutator(self, a: &CMatrix) -> CMatrix {
        let n = a.nrows();
        let mut out = CMatrix::zeros(n, n);
        for (r, c, v) in self.entries() {
            if v == ZERO {
                continue;
            }
            for j in 0..n {
                out[(r, j)] += v * a[(c, j)];
                out[(j, c)] -= a[(j, r)] * v;
            }
        }
        out
    }
}

fn skew_from(basis: &[Skew], coeffs: &[f64], n: usize) -> CMatrix {
    let mut k = CMatrix::zeros(n, n);
    for (b, &c) in basis.iter().zip(coeffs) {
        for (r, col, v) in b.entries() {
            k[(r, col)] += v * c;
        }
    }
    k
}

/// `(1 − K/2)⁻¹(1 + K/2)`, unitary for skew-Hermitian `K`.
fn cayley(k: &CMatrix) -> CMatrix {
    let n = k.nrows();
    let half = k * Complex64::new(0.5, 0.0);
    let lhs = identity(n) - &half;
    let rhs = identity(n) + half;
    lhs.lu().solve(&rhs).expect("1 − K/2 is invertible for skew-Hermitian K")
}

/// Real coordinates of the Hermitian entries on `mask`, scaled so the
/// Euclidean norm equals the Frobenius norm of the masked part.
struct Layout {
    cells: Vec<(usize, usize)>,
}

impl Layout {
    fn full(n: usize) -> Self {
        Self::blocks(&[(0, n)])
    }

    fn blocks(intervals: &[(usize, usize)]) -> Self {
        let mut cells = Vec::new();
        for &(s, e) in intervals {
            for a in s..e {
                for b in a..e {
                    cells.push((a, b));
                }
            }
        }
        Self { cells }
    }

    fn len(&self) -> usize {
        self.cells.iter().map(|(a, b)| if a == b { 1 } else { 2 }).sum()
    }

    fn write(&self, m: &CMatrix, out: &mut [f64]) {
        let s2 = std::f64::consts::SQRT_2;
        let mut i = 0;
        for &(a, b) in &self.cells {
            if a == b {
                out[i] = m[(a, a)].re;
                i += 1;
            } else {
                out[i] = s2 * m[(a, b)].re;
                out[i + 1] = s2 * m[(a, b)].im;
                i += 2;
            }
        }
    }

    fn vector(&self, m: &CMatrix) -> DVector<f64> {
        let mut v = DVector::zeros(self.len());
        self.write(m, v.as_mut_slice());
        v
    }
}

/// State on `U(n)^k × ℝ^a`.
#[derive(Clone)]
struct State {
    unitaries: Vec<CMatrix>,
    angles: Vec<f64>,
}

trait Problem: Sync {
    fn dim(&self) -> usize;
    fn residual(&self, s: &State) -> DVector<f64>;
    fn jacobian(&self, s: &State) -> DMatrix<f64>;
    fn retract(&self, s: &State, step: &[f64]) -> State;
    fn start(&self, restart: usize, seed: u64) -> State;
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    seed ^ (restart as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn random_state(n: usize, count: usize, angles: usize, restart: usize, seed: u64) -> State {
    if restart == 0 {
        return State { unitaries: vec![identity(n); count], angles: vec![std::f64::consts::PI; angles] };
    }
    let mut rng = rng_from_seed(restart_seed(seed, restart));
    let unitaries = (0..count).map(|_| sample_unitary(n, &mut rng)).collect();
    let angles = (0..angles).map(|_| rand::Rng::random_range(&mut rng, 0.3..std::f64::consts::PI)).collect();
    State { unitaries, angles }
}

/// One Levenberg-Marquardt run; returns the final state and `‖r‖`.
fn solve<P: Problem>(p: &P, mut s: State, budget: &OracleBudget) -> (State, f64) {
    let stop = budget.success_tol * 1e-3;
    let mut r = p.residual(&s);
    let mut cost = r.norm_squared();
    let mut mu = -1.0;
    let mut nu = 2.0;
    let mut history = vec![cost];
    for _ in 0..budget.iterations {
        if cost.sqrt() <= stop {
            break;
        }
        let j = p.jacobian(&s);
        let g = j.transpose() * &r;
        let mut h = j.transpose() * &j;
        if mu < 0.0 {
            mu = budget.initial_damping * h.diagonal().max().max(1e-12);
        }
        if g.amax() <= 1e-15 * (1.0 + cost) {
            break;
        }
        let mut accepted = false;
        while !accepted && mu <= budget.max_damping {
            for i in 0..h.nrows() {
                h[(i, i)] += mu;
            }
            let step = h.clone().cholesky().map(|c| c.solve(&(-&g)));
            for i in 0..h.nrows() {
                h[(i, i)] -= mu;
            }
            let Some(step) = step else {
                mu *= nu;
                nu *= 2.0;
                continue;
            };
            let cand = p.retract(&s, step.as_slice());
            let rc = p.residual(&cand);
            let cc = rc.norm_squared();
            let predicted = step.dot(&(&step * mu - &g));
            if cc < cost && predicted > 0.0 {
                let rho = (cost - cc) / predicted;
                mu *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                s = cand;
                r = rc;
                cost = cc;
                accepted = true;
            } else {
                mu *= nu;
                nu *= 2.0;
            }
        }
        if !accepted {
            break;
        }
        history.push(cost);
        if history.len() > STALL_WINDOW && cost > history[history.len() - 1 - STALL_WINDOW] * (1.0 - 1e-4) {
            break;
        }
    }
    (s, cost.sqrt())
}

/// Runs restarts in batches; `verify` rebuilds the candidate and returns its
/// witness and verified residual.
fn search<P, V>(p: &P, budget: &OracleBudget, verify: V) -> Result<OracleOutcome>
where
    P: Problem,
    V: Fn(&State) -> Result<(Witness, f64)> + Sync + Send,
{
    budget.check()?;
    let mut best = f64::INFINITY;
    let mut used = 0;
    let mut start = 0;
    while start < budget.restarts {
        let end = (start + BATCH).min(budget.restarts);
        let runs = exec::map_range(budget.exec, end - start, |k| {
            let (s, _) = solve(p, p.start(start + k, budget.seed), budget);
            verify(&s)
        });
        for (k, run) in runs.into_iter().enumerate() {
            let (w, res) = run?;
            best = best.min(res);
            if res <= budget.success_tol {
                return Ok(OracleOutcome {
                    status: OracleStatus::WitnessFound,
                    witness: Some(w),
                    residual: res,
                    restarts_used: start + k + 1,
                });
            }
        }
        used = end;
        start = end;
    }
    Ok(OracleOutcome { status: OracleStatus::Exhausted, witness: None, residual: best, restarts_used: used })
}

struct SpectraSum {
    n: usize,
    target: CMatrix,
    parts: Vec<CMatrix>,
    basis: Vec<Skew>,
    layout: Layout,
}

impl SpectraSum {
    fn conjugates(&self, s: &State) -> Vec<CMatrix> {
        s.unitaries.iter().zip(&self.parts).map(|(u, d)| u * d * u.adjoint()).collect()
    }
}

impl Problem for SpectraSum {
    fn dim(&self) -> usize {
        self.parts.len() * self.basis.len()
    }

    fn residual(&self, s: &State) -> DVector<f64> {
        let sum = self.conjugates(s).into_iter().fold(-&self.target, |acc, a| acc + a);
        self.layout.vector(&sum)
    }

    fn jacobian(&self, s: &State) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.layout.len(), self.dim());
        for (i, a) in self.conjugates(s).iter().enumerate() {
            for (b, e) in self.basis.iter().enumerate() {
                let col = i * self.basis.len() + b;
                self.layout.write(&e.commutator(a), j.column_mut(col).as_mut_slice());
            }
        }
        j
    }

    fn retract(&self, s: &State, step: &[f64]) -> State {
        let d = self.basis.len();
        let unitaries = s
            .unitaries
            .iter()
            .enumerate()
            .map(|(i, u)| cayley(&skew_from(&self.basis, &step[i * d..(i + 1) * d], self.n)) * u)
            .collect();
        State { unitaries, angles: Vec::new() }
    }

    fn start(&self, restart: usize, seed: u64) -> State {
        random_state(self.n, self.parts.len(), 0, restart, seed)
    }
}

/// Searches unitaries `U_i` with `Σ U_i Diag(λⁱ) U_i* = Diag(λ⁰)`.
pub fn realize_spectra_sum(l0: &Spectrum, ls: &[Spectrum], budget: &OracleBudget) -> Result<OracleOutcome> {
    let n = l0.len();
    if n == 0 {
        return Err(Error::EmptyOrder);
    }
    if let Some(bad) = ls.iter().find(|l| l.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
    }
    let p = SpectraSum {
        n,
        target: diag_real(l0.values()),
        parts: ls.iter().map(|l| diag_real(l.values())).collect(),
        basis: skew_basis(n),
        layout: Layout::full(n),
    };
    search(&p, budget, |s| {
        let us = s.unitaries.iter().map(|u| Unitary::new(u.clone())).collect::<Result<Vec<_>>>()?;
        let sum = us
            .iter()
            .zip(&p.parts)
            .fold(-&p.target, |acc, (u, d)| acc + u.matrix() * d * u.matrix().adjoint());
        Ok((Witness::Unitaries(us), frobenius(&sum)))
    })
}

struct BlockProblem {
    n: usize,
    b: CMatrix,
    targets: CMatrix,
    mode: CompressionMode,
    basis: Vec<Skew>,
    layout: Layout,
}

impl BlockProblem {
    fn singular(theta: f64) -> f64 {
        (1.0 - theta.cos()) / 2.0
    }

    fn x(&self, s: &State) -> CMatrix {
        match self.mode {
            CompressionMode::Unitary => s.unitaries[0].clone(),
            CompressionMode::Contractive => {
                let sv: Vec<f64> = s.angles.iter().map(|&t| Self::singular(t)).collect();
                &s.unitaries[0] * diag_real(&sv) * s.unitaries[1].adjoint()
            }
        }
    }
}

impl Problem for BlockProblem {
    fn dim(&self) -> usize {
        match self.mode {
            CompressionMode::Unitary => self.basis.len(),
            CompressionMode::Contractive => 2 * self.basis.len() + self.n,
        }
    }

    fn residual(&self, s: &State) -> DVector<f64> {
        let x = self.x(s);
        self.layout.vector(&(x.adjoint() * &self.b * x - &self.targets))
    }

    fn jacobian(&self, s: &State) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.layout.len(), self.dim());
        let d = self.basis.len();
        match self.mode {
            CompressionMode::Unitary => {
                let x = &s.unitaries[0];
                let m = x.adjoint() * &self.b * x;
                for (c, e) in self.basis.iter().enumerate() {
                    self.layout.write(&-e.commutator(&m), j.column_mut(c).as_mut_slice());
                }
            }
            CompressionMode::Contractive => {
                let (u, v) = (&s.unitaries[0], &s.unitaries[1]);
                let sv: Vec<f64> = s.angles.iter().map(|&t| Self::singular(t)).collect();
                let sd = diag_real(&sv);
                let g = u.adjoint() * &self.b * u;
                let sg = &sd * &g;
                let nn = &sg * &sd;
                let vad = v.adjoint();
                for (c, e) in self.basis.iter().enumerate() {
                    let dm = v * (&sd * -e.commutator(&g) * &sd) * &vad;
                    self.layout.write(&dm, j.column_mut(c).as_mut_slice());
                    let dm = v * e.commutator(&nn) * &vad;
                    self.layout.write(&dm, j.column_mut(d + c).as_mut_slice());
                }
                for k in 0..self.n {
                    let ds = s.angles[k].sin() / 2.0;
                    let mut inner = CMatrix::zeros(self.n, self.n);
                    for t in 0..self.n {
                        inner[(k, t)] += sg[(t, k)].conj() * ds;
                        inner[(t, k)] += sg[(t, k)] * ds;
                    }
                    let dm = v * inner * &vad;
                    self.layout.write(&dm, j.column_mut(2 * d + k).as_mut_slice());
                }
            }
        }
        j
    }

    fn retract(&self, s: &State, step: &[f64]) -> State {
        let d = self.basis.len();
        let u = &s.unitaries[0] * cayley(&skew_from(&self.basis, &step[..d], self.n));
        match self.mode {
            CompressionMode::Unitary => State { unitaries: vec![u], angles: Vec::new() },
            CompressionMode::Contractive => {
                let v = &s.unitaries[1] * cayley(&skew_from(&self.basis, &step[d..2 * d], self.n));
                let angles = s.angles.iter().zip(&step[2 * d..]).map(|(a, da)| a + da).collect();
                State { unitaries: vec![u, v], angles }
            }
        }
    }

    fn start(&self, restart: usize, seed: u64) -> State {
        match self.mode {
            CompressionMode::Unitary => random_state(self.n, 1, 0, restart, seed),
            CompressionMode::Contractive => random_state(self.n, 2, self.n, restart, seed),
        }
    }
}

/// `sqrt(Σ_i ‖λ(block_i(M))↓ − t_i↓‖²)`.
pub fn block_spectral_residual(m: &CMatrix, targets: &[Spectrum], p: &ProjectionSystem) -> Result<f64> {
    let mut total = 0.0;
    for ((s, e), t) in p.intervals().into_iter().zip(targets) {
        let block = Hermitian::symmetrized(m.view((s, s), (e - s, e - s)).into_owned());
        let got = eig_sorted(&block).0;
        total += got.values().iter().zip(t.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(total.sqrt())
}

/// Searches `X` (unitary, or a contraction) whose compression
/// `𝒞_𝒫(X*BX)` has block spectra `targets`.
pub fn realize_block_compression(
    b: &Hermitian,
    targets: &[Spectrum],
    ranks: &ProjectionSystem,
    mode: CompressionMode,
    budget: &OracleBudget,
) -> Result<OracleOutcome> {
    let n = b.order();
    if ranks.order() != n {
        return Err(Error::DimensionMismatch { expected: n, found: ranks.order() });
    }
    if targets.len() != ranks.len() {
        return Err(Error::DimensionMismatch { expected: ranks.len(), found: targets.len() });
    }
    for (t, &r) in targets.iter().zip(ranks.ranks()) {
        if t.len() != r {
            return Err(Error::DimensionMismatch { expected: r, found: t.len() });
        }
    }
    let diag: Vec<f64> = targets.iter().flat_map(|t| t.values().iter().copied()).collect();
    let intervals = ranks.intervals();
    let p = BlockProblem {
        n,
        b: b.matrix().clone(),
        targets: diag_real(&diag),
        mode,
        basis: skew_basis(n),
        layout: Layout::blocks(&intervals),
    };
    search(&p, budget, |s| {
        let x = p.x(s);
        let res = block_spectral_residual(&(x.adjoint() * b.matrix() * &x), targets, ranks)?;
        let w = match mode {
            CompressionMode::Unitary => Witness::Unitary(Unitary::new(x)?),
            CompressionMode::Contractive => Witness::Contraction(Contraction::new(x)?),
        };
        Ok((w, res))
    })
}

/// One instance of the spectra-of-sums problem.
#[derive(Debug, Clone)]
pub struct SumInstance {
    pub target: Spectrum,
    pub summands: Vec<Spectrum>,
}

impl SumInstance {
    /// Half-integer spectra in `[−3, 3]`; the target's smallest entry is
    /// adjusted so that traces agree. Roughly half come out feasible.
    pub fn random(n: usize, m: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-6i32..=6) as f64 / 2.0).collect() };
        let summands: Vec<Spectrum> = (0..m).map(|_| Spectrum::new(draw(n))).collect();
        let total: f64 = summands.iter().map(Spectrum::sum).sum();
        let mut target = draw(n);
        target.sort_by(|a, b| b.total_cmp(a));
        let rest: f64 = target[..n - 1].iter().sum();
        target[n - 1] = total - rest;
        Self { target: Spectrum::new(target), summands }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationEntry {
    pub decision: Decision,
    pub status: OracleStatus,
    pub residual: f64,
    /// For `Infeasible` verdicts: whether the certificate re-evaluates as
    /// violated.
    pub certificate_checked: Option<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
    pub agreements: usize,
    /// Exact `Feasible` without a numeric witness: suspicious, not decisive.
    pub suspicious: Vec<usize>,
    /// Exact `Infeasible` next to a verified witness, or a certificate that
    /// does not re-evaluate as violated.
    pub hard_failures: Vec<usize>,
}

impl ValidationReport {
    pub fn feasible_count(&self) -> usize {
        self.entries.iter().filter(|e| e.decision.verdict == Verdict::Feasible).count()
    }

    pub fn feasible_with_witness(&self, tol: f64) -> usize {
        self.entries
            .iter()
            .filter(|e| e.decision.verdict == Verdict::Feasible && e.status == OracleStatus::WitnessFound && e.residual < tol)
            .count()
    }
}

fn certificate_holds(inst: &SumInstance, cert: &Certificate) -> bool {
    match cert {
        Certificate::Inequality { subsets, lhs, rhs } => {
            let Some(first) = subsets.first() else { return false };
            let Ok(l) = subset_sum(inst.target.values(), &dual_subset(first)) else { return false };
            let mut r = 0.0;
            for (s, sp) in subsets[1..].iter().zip(&inst.summands) {
                match subset_sum(sp.values(), &dual_subset(s)) {
                    Ok(v) => r += v,
                    Err(_) => return false,
                }
            }
            (l - lhs).abs() < 1e-9 && (r - rhs).abs() < 1e-9 && r > l
        }
        Certificate::Trace { lhs, rhs, .. } => lhs != rhs,
        _ => true,
    }
}

/// Runs `decider` and the oracle on every instance; the oracle's budget seed
/// is offset by the instance index.
pub fn cross_validate<D>(instances: &[SumInstance], decider: D, budget: &OracleBudget) -> Result<ValidationReport>
where
    D: Fn(&Spectrum, &[Spectrum]) -> Result<Decision>,
{
    let mut report = ValidationReport::default();
    for (idx, inst) in instances.iter().enumerate() {
        let decision = decider(&inst.target, &inst.summands)?;
        let b = OracleBudget { seed: budget.seed.wrapping_add(idx as u64), ..budget.clone() };
        let outcome = realize_spectra_sum(&inst.target, &inst.summands, &b)?;
        let certificate_checked = decision.certificate.as_ref().map(|c| certificate_holds(inst, c));
        match (decision.verdict, outcome.status) {
            (Verdict::Infeasible, OracleStatus::WitnessFound) => report.hard_failures.push(idx),
            (Verdict::Infeasible, _) if certificate_checked == Some(false) => report.hard_failures.push(idx),
            (Verdict::Feasible, OracleStatus::Exhausted) => report.suspicious.push(idx),
            _ => report.agreements += 1,
        }
        report.entries.push(ValidationEntry {
            decision,
            status: outcome.status,
            residual: outcome.residual,
            certificate_checked,
        });
    }
    Ok(report)
}
