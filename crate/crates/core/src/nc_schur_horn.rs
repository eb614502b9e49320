//! Spectra of block compressions, partial traces and conditional
//! expectations onto unital subalgebras, with witness constructions.

use std::collections::HashSet;

use num_complex::Complex64;

use crate::algebra::{compress, compress_matrix, direct_sum, embed_block, tce, tensor, ProjectionSystem, SpectralList};
use crate::decision::{Certificate, Decision, TraceRelation, Verdict};
use crate::error::{Error, Result};
use crate::hermitian::{
    align_order, apply_function, eig_sorted, identity, max_abs_diff, scale, svd, reconstruct, CMatrix, Contraction, Hermitian, Psd,
    Spectrum, Unitary, TOL, ZERO,
};
use crate::klyachko::{klyachko_feasible_dominated, klyachko_feasible_sum};
use crate::majorization::{majorization_violation, schur_horn_construct, sorted_desc, weak_majorization_violation};
use crate::oracle::{realize_block_compression, realize_spectra_sum, OracleBudget, Witness};

pub use crate::oracle::CompressionMode as Mode;

/// A shift `α ≥ 0` making `S + α·1` positive semi-definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftParameter(f64);

impl ShiftParameter {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::Precondition(format!("shift must be finite and nonnegative, got {alpha}")));
        }
        Ok(Self(alpha))
    }

    /// `‖S‖_op` from the spectrum.
    pub fn operator_norm(spectrum: &Spectrum) -> Self {
        Self(spectrum.max_abs())
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Resolution of the intermediate-spectra grid searches.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResolution {
    /// Grid points per unit of the spectral range on each side of the seed.
    pub steps: usize,
    /// Cap on block-feasibility checks.
    pub max_candidates: usize,
}

impl Default for SearchResolution {
    fn default() -> Self {
        Self { steps: 3, max_candidates: 20_000 }
    }
}

fn spectral_tol(values: &[f64]) -> f64 {
    TOL.majorization * values.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

fn check_targets(n: usize, targets: &[Spectrum], ranks: &ProjectionSystem) -> Result<()> {
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
    Ok(())
}

/// Whether a contraction `V` with `𝒞_𝒫(V*SV) = ⊕ S_i` exists, for PSD `S`
/// and PSD targets given by their spectra.
pub fn block_feasible_contractive(ls: &Spectrum, targets: &[Spectrum], ranks: &ProjectionSystem) -> Result<Decision> {
    let n = ls.len();
    check_targets(n, targets, ranks)?;
    let tol = spectral_tol(ls.values());
    if ls.values().last().is_some_and(|&v| v < -tol) {
        return Err(Error::NotPsd(*ls.values().last().unwrap()));
    }
    for (i, t) in targets.iter().enumerate() {
        if let Some(&v) = t.values().last().filter(|&&v| v < -tol) {
            return Err(Error::Precondition(format!("target {i} has negative entry {v}")));
        }
    }
    let padded: Vec<Spectrum> = targets.iter().map(|t| t.padded(n)).collect();
    klyachko_feasible_dominated(ls, &padded)
}

/// Whether a unitary `U` with `𝒞_𝒫(U*SU) = ⊕ S_i` exists. The default
/// shift is `‖S‖_op`; the verdict does not depend on the shift.
pub fn block_feasible_unitary(
    ls: &Spectrum,
    targets: &[Spectrum],
    ranks: &ProjectionSystem,
    alpha: Option<ShiftParameter>,
) -> Result<Decision> {
    let n = ls.len();
    check_targets(n, targets, ranks)?;
    let alpha = alpha.unwrap_or_else(|| ShiftParameter::operator_norm(ls)).value();
    let tol = spectral_tol(ls.values()).max(TOL.majorization * alpha);
    if let Some(&low) = ls.values().last().filter(|&&v| v + alpha < -tol) {
        return Err(Error::Precondition(format!("shift {alpha} leaves S + α·1 with eigenvalue {}", low + alpha)));
    }
    for (block, t) in targets.iter().enumerate() {
        if let Some(&low) = t.values().last().filter(|&&v| v + alpha < -tol) {
            return Ok(Decision::infeasible(Certificate::Negativity { block, value: low + alpha }));
        }
    }
    let shifted: Vec<Spectrum> = targets.iter().map(|t| t.shifted(alpha).padded(n)).collect();
    klyachko_feasible_sum(&ls.shifted(alpha), &shifted)
}

fn svd_parts(t: &CMatrix) -> (CMatrix, CMatrix) {
    let s = svd(t);
    (s.u, s.v_t)
}

/// Unitaries `V_i` with `S ≥ Σ V_i* (⊕_j δ_ij S_j) V_i`, where `S_j` are the
/// diagonal blocks of `V*SV`.
///
/// `T_i = S^{1/2} V P_i` has `T_i*T_i = ⊕_j δ_ij S_j` and
/// `Σ T_i T_i* = S^{1/2} V V* S^{1/2} ≤ S`; `V_i` aligns the two polar sides.
pub fn witness_unitaries_from_contraction(s: &Psd, v: &Contraction, p: &ProjectionSystem) -> Result<Vec<Unitary>> {
    let n = s.order();
    if v.order() != n || p.order() != n {
        return Err(Error::DimensionMismatch { expected: n, found: v.order().max(p.order()) });
    }
    let root = s.sqrt();
    let blocks = compress(p, &(v.matrix().adjoint() * s.matrix() * v.matrix()))?;
    let mut out = Vec::with_capacity(p.len());
    let mut total = CMatrix::zeros(n, n);
    for (i, (a, b)) in p.intervals().into_iter().enumerate() {
        let mut vp = CMatrix::zeros(n, n);
        vp.columns_mut(a, b - a).copy_from(&v.matrix().columns(a, b - a));
        let t = root.matrix() * vp;
        let (x, y_t) = svd_parts(&t);
        let vi = Unitary::new(y_t.adjoint() * x.adjoint())?;
        let e = embed_block(p, i, &blocks.blocks()[i]);
        total += vi.matrix().adjoint() * e * vi.matrix();
        out.push(vi);
    }
    let gap = Hermitian::symmetrized(s.matrix() - total).min_eigenvalue();
    let tol = TOL.psd * scale(s.matrix());
    if gap < -tol {
        return Err(Error::Precondition(format!("witness inequality fails by {gap:e}")));
    }
    Ok(out)
}

/// A contraction `V` with `𝒞_𝒫(V*SV) = ⊕ S_i`, given unitaries satisfying
/// `S ≥ Σ V_i* (⊕_j δ_ij S_j) V_i`.
///
/// With `R = Σ V_i* (⊕_j δ_ij S_j)^{1/2}` one has `RR* ≤ S` and
/// `𝒞_𝒫(R*R) = ⊕ S_i`; the result is `S^{+1/2} R`, which equals `W·U` for
/// `W = S^{+1/2}(RR*)^{1/2}` and the polar unitary `U` of `R`.
pub fn witness_contraction_from_unitaries(
    s: &Psd,
    blocks: &[Psd],
    vs: &[Unitary],
    p: &ProjectionSystem,
) -> Result<Contraction> {
    let n = s.order();
    if p.order() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p.order() });
    }
    if blocks.len() != p.len() || vs.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: blocks.len().min(vs.len()) });
    }
    let mut r = CMatrix::zeros(n, n);
    let mut total = CMatrix::zeros(n, n);
    for (i, (b, v)) in blocks.iter().zip(vs).enumerate() {
        if b.order() != p.ranks()[i] || v.order() != n {
            return Err(Error::DimensionMismatch { expected: p.ranks()[i], found: b.order() });
        }
        let e = embed_block(p, i, b.sqrt().matrix());
        r += v.matrix().adjoint() * &e;
        total += v.matrix().adjoint() * &e * &e * v.matrix();
    }
    let gap = Hermitian::symmetrized(s.matrix() - total).min_eigenvalue();
    if gap < -TOL.psd * scale(s.matrix()) {
        return Err(Error::Precondition(format!("S ≥ Σ V_i*(⊕δ_ij S_j)V_i fails by {gap:e}")));
    }
    Contraction::clipped(s.pinv_sqrt().matrix() * r)
}

/// A candidate chain for membership: `mu[j]` are block spectra of a unitary
/// (or contractive) compression of `B`, `lambda[j]` the per-copy spectra.
#[derive(Debug, Clone)]
pub struct MembershipChain {
    pub list: SpectralList,
    pub mu: Vec<Spectrum>,
    pub lambda: Vec<Spectrum>,
    pub eta: Vec<f64>,
}

/// One group `(d, c)` with per-copy spectrum `alpha` of length `d`.
#[derive(Debug, Clone)]
struct Group {
    alpha: Vec<f64>,
    c: usize,
}

fn group_eta(groups: &[Group]) -> Vec<f64> {
    groups.iter().flat_map(|g| g.alpha.iter().flat_map(move |&a| std::iter::repeat_n(a, g.c))).collect()
}

fn necessary(lb: &Spectrum, groups: &[Group], mode: Mode) -> Option<Certificate> {
    let eta = group_eta(groups);
    let tol = spectral_tol(lb.values());
    match mode {
        Mode::Unitary => {
            let (lhs, rhs) = (lb.sum(), eta.iter().sum::<f64>());
            if (lhs - rhs).abs() > tol {
                return Some(Certificate::Trace { relation: TraceRelation::Equal, lhs, rhs });
            }
            majorization_violation(lb.values(), &eta)
                .ok()
                .flatten()
                .map(|v| Certificate::Majorization { k: v.k, lhs: v.lhs, rhs: v.rhs })
        }
        Mode::Contractive => {
            if let Some((block, &value)) =
                groups.iter().enumerate().find_map(|(i, g)| g.alpha.iter().find(|&&a| a < -tol).map(|v| (i, v)))
            {
                return Some(Certificate::Negativity { block, value });
            }
            weak_majorization_violation(lb.values(), &eta)
                .ok()
                .flatten()
                .map(|v| Certificate::Majorization { k: v.k, lhs: v.lhs, rhs: v.rhs })
        }
    }
}

fn blocks_feasible(lb: &Spectrum, mu: &[Spectrum], ranks: &ProjectionSystem, mode: Mode) -> Result<Decision> {
    match mode {
        Mode::Unitary => block_feasible_unitary(lb, mu, ranks, None),
        Mode::Contractive => block_feasible_contractive(lb, mu, ranks),
    }
}

fn group_feasible(g: &Group, mus: &[Spectrum]) -> Result<bool> {
    let target = Spectrum::new(g.alpha.iter().map(|a| a * g.c as f64).collect());
    Ok(klyachko_feasible_sum(&target, mus)?.is_feasible())
}

/// Candidate `c`-tuples for one group: seed plus grid offsets with zero
/// total trace, sorted within the tuple to drop relabelings.
fn group_candidates(g: &Group, range: (f64, f64), res: &SearchResolution, cap: usize) -> Result<Vec<Vec<Spectrum>>> {
    let d = g.alpha.len();
    let seed = vec![Spectrum::new(g.alpha.clone()); g.c];
    if g.c == 1 || res.steps == 0 {
        return Ok(vec![seed]);
    }
    let width = (range.1 - range.0).max(0.0);
    let h = width / res.steps as f64;
    let k = res.steps as i64;
    let slots = d * g.c;
    let mut out = vec![seed];
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut offs = vec![-k; slots - 1];
    let tol = spectral_tol(&[range.0, range.1]);
    'outer: loop {
        let last = -offs.iter().sum::<i64>();
        if last.abs() <= k {
            let mut all = offs.clone();
            all.push(last);
            let mut tuple: Vec<(Vec<i64>, Spectrum)> = (0..g.c)
                .map(|j| {
                    let o = &all[j * d..(j + 1) * d];
                    let v: Vec<f64> = g.alpha.iter().zip(o).map(|(a, &x)| a + x as f64 * h).collect();
                    let s = Spectrum::new(v);
                    let key: Vec<i64> = s.values().iter().map(|x| (x / h.max(1e-300) * 1e6).round() as i64).collect();
                    (key, s)
                })
                .collect();
            let in_range = tuple
                .iter()
                .all(|(_, s)| s.values().iter().all(|&x| x >= range.0 - tol && x <= range.1 + tol));
            if in_range {
                tuple.sort_by(|a, b| a.0.cmp(&b.0));
                let key: Vec<i64> = tuple.iter().flat_map(|(k, _)| k.iter().copied()).collect();
                if seen.insert(key) {
                    let mus: Vec<Spectrum> = tuple.into_iter().map(|(_, s)| s).collect();
                    if group_feasible(g, &mus)? {
                        out.push(mus);
                        if out.len() >= cap {
                            break 'outer;
                        }
                    }
                }
            }
        }
        let mut pos = 0;
        loop {
            if pos == offs.len() {
                break 'outer;
            }
            offs[pos] += 1;
            if offs[pos] <= k {
                break;
            }
            offs[pos] = -k;
            pos += 1;
        }
    }
    Ok(out)
}

/// Searches block spectra `μ` of a compression of `B` along the rank list of
/// `groups` such that each group's `μ`s sum (as Hermitian spectra) to
/// `c·alpha`.
fn chain_search(
    lb: &Spectrum,
    groups: &[Group],
    mode: Mode,
    res: &SearchResolution,
) -> Result<(Decision, Option<Vec<Spectrum>>)> {
    if let Some(cert) = necessary(lb, groups, mode) {
        return Ok((Decision::infeasible(cert), None));
    }
    let ranks =
        ProjectionSystem::new(groups.iter().flat_map(|g| std::iter::repeat_n(g.alpha.len(), g.c)).collect())?;
    let seed: Vec<Spectrum> =
        groups.iter().flat_map(|g| std::iter::repeat_n(Spectrum::new(g.alpha.clone()), g.c)).collect();
    let first = blocks_feasible(lb, &seed, &ranks, mode)?;
    if first.is_feasible() {
        return Ok((first, Some(seed)));
    }
    if groups.iter().all(|g| g.c == 1) {
        return Ok((first, None));
    }
    let range = match mode {
        Mode::Unitary => (*lb.values().last().expect("nonempty"), lb.values()[0]),
        Mode::Contractive => (0.0, lb.values()[0].max(0.0)),
    };
    let per_group = groups
        .iter()
        .map(|g| group_candidates(g, range, res, res.max_candidates))
        .collect::<Result<Vec<_>>>()?;
    let mut idx = vec![0usize; groups.len()];
    let mut checks = 0;
    loop {
        let mu: Vec<Spectrum> = idx.iter().zip(&per_group).flat_map(|(&i, c)| c[i].iter().cloned()).collect();
        if idx.iter().any(|&i| i > 0) {
            checks += 1;
            if blocks_feasible(lb, &mu, &ranks, mode)?.is_feasible() {
                return Ok((Decision::feasible(), Some(mu)));
            }
            if checks >= res.max_candidates {
                break;
            }
        }
        let Some(p) = (0..idx.len()).rev().find(|&p| idx[p] + 1 < per_group[p].len()) else { break };
        idx[p] += 1;
        idx[p + 1..].fill(0);
    }
    Ok((Decision::inconclusive(), None))
}

/// Whether some `A` with spectrum `target` is `Tr_m` of a unitary (or
/// contractive) congruence of `S`, where `S` has order `d·m`.
pub fn partial_trace_feasible(
    ls: &Spectrum,
    target: &Spectrum,
    d: usize,
    m: usize,
    mode: Mode,
    res: &SearchResolution,
) -> Result<Decision> {
    if d == 0 || m == 0 || ls.len() != d * m {
        return Err(Error::DimensionMismatch { expected: d * m, found: ls.len() });
    }
    if target.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: target.len() });
    }
    let tol = spectral_tol(ls.values());
    match mode {
        Mode::Unitary => {
            let (lhs, rhs) = (ls.sum(), target.sum());
            if (lhs - rhs).abs() > tol {
                return Ok(Decision::infeasible(Certificate::Trace { relation: TraceRelation::Equal, lhs, rhs }));
            }
        }
        Mode::Contractive => {
            if ls.values().last().is_some_and(|&v| v < -tol) {
                return Err(Error::NotPsd(*ls.values().last().unwrap()));
            }
        }
    }
    let group = Group { alpha: target.values().iter().map(|v| v / m as f64).collect(), c: m };
    Ok(chain_search(ls, &[group], mode, res)?.0)
}

/// Reads `η = [ηⁱ]` group by group: each sorted `ηⁱ` must repeat every value
/// `c(i)` times.
fn parse_eta(eta: &[f64], l: &SpectralList) -> std::result::Result<Vec<Group>, Certificate> {
    let tol = spectral_tol(eta);
    let mut groups = Vec::with_capacity(l.len());
    let mut offset = 0;
    for (i, &(d, c)) in l.pairs().iter().enumerate() {
        let block = sorted_desc(&eta[offset..offset + d * c]);
        offset += d * c;
        for r in 0..d {
            let run = &block[r * c..(r + 1) * c];
            if run.iter().any(|v| (v - run[0]).abs() > tol) {
                return Err(Certificate::Structure(format!(
                    "group {i} (d = {d}, c = {c}): values {run:?} should coincide"
                )));
            }
        }
        groups.push(Group { alpha: (0..d).map(|r| block[r * c]).collect(), c });
    }
    Ok(groups)
}

/// Membership of `η` in `M_B(𝐥)`, returning the chain found when feasible.
pub fn membership_chain(
    eta: &[f64],
    b: &Hermitian,
    l: &SpectralList,
    mode: Mode,
    res: &SearchResolution,
) -> Result<(Decision, Option<MembershipChain>)> {
    if eta.len() != b.order() || l.order() != b.order() {
        return Err(Error::DimensionMismatch { expected: b.order(), found: eta.len() });
    }
    if mode == Mode::Contractive {
        Psd::new(b.clone())?;
    }
    let groups = match parse_eta(eta, l) {
        Ok(g) => g,
        Err(cert) => return Ok((Decision::infeasible(cert), None)),
    };
    let (decision, mu) = chain_search(&b.spectrum(), &groups, mode, res)?;
    let chain = mu.map(|mu| MembershipChain {
        list: l.clone(),
        lambda: groups.iter().flat_map(|g| std::iter::repeat_n(Spectrum::new(g.alpha.clone()), g.c)).collect(),
        mu,
        eta: eta.to_vec(),
    });
    Ok((decision, chain))
}

pub fn membership_mb(eta: &[f64], b: &Hermitian, l: &SpectralList, mode: Mode) -> Result<Decision> {
    Ok(membership_chain(eta, b, l, mode, &SearchResolution::default())?.0)
}

/// Distinct ways to deal the sorted spectrum into the groups of `l`, each
/// group taking `d(i)` values with multiplicity `c(i)`.
fn group_assignments(values: &[f64], l: &SpectralList, cap: usize) -> Vec<Vec<f64>> {
    let sorted = sorted_desc(values);
    let tol = spectral_tol(&sorted);
    let mut reps: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for &v in &sorted {
        match reps.last() {
            Some(&r) if (r - v).abs() <= tol => *counts.last_mut().unwrap() += 1,
            _ => {
                reps.push(v);
                counts.push(1);
            }
        }
    }

    fn choose(k: usize, need: usize, c: usize, left: &[usize], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if need == 0 {
            out.push(cur.clone());
            return;
        }
        if k == left.len() {
            return;
        }
        let most = (left[k] / c).min(need);
        for take in (0..=most).rev() {
            cur.extend(std::iter::repeat_n(k, take));
            choose(k + 1, need - take, c, left, cur, out);
            cur.truncate(cur.len() - take);
        }
    }

    struct Search<'a> {
        pairs: &'a [(usize, usize)],
        seen: HashSet<Vec<Vec<usize>>>,
        out: Vec<Vec<Vec<usize>>>,
        cap: usize,
    }

    fn go(s: &mut Search, g: usize, left: &mut Vec<usize>, acc: &mut Vec<Vec<usize>>) {
        if s.out.len() >= s.cap {
            return;
        }
        if g == s.pairs.len() {
            let mut key: Vec<(usize, usize, Vec<usize>)> =
                s.pairs.iter().zip(acc.iter()).map(|(&(d, c), a)| (d, c, a.clone())).collect();
            key.sort();
            if s.seen.insert(key.into_iter().map(|(d, c, mut a)| {
                a.insert(0, c);
                a.insert(0, d);
                a
            }).collect()) {
                s.out.push(acc.clone());
            }
            return;
        }
        let (d, c) = s.pairs[g];
        let mut options = Vec::new();
        choose(0, d, c, left, &mut Vec::new(), &mut options);
        for opt in options {
            for &k in &opt {
                left[k] -= c;
            }
            acc.push(opt.clone());
            go(s, g + 1, left, acc);
            acc.pop();
            for &k in &opt {
                left[k] += c;
            }
        }
    }

    let mut s = Search { pairs: l.pairs(), seen: HashSet::new(), out: Vec::new(), cap };
    go(&mut s, 0, &mut counts.clone(), &mut Vec::new());
    s.out
        .into_iter()
        .map(|assign| {
            assign
                .iter()
                .zip(l.pairs())
                .flat_map(|(ks, &(_, c))| ks.iter().flat_map(move |&k| std::iter::repeat_n(k, c)))
                .map(|k| reps[k])
                .collect()
        })
        .collect()
}

fn combine(decisions: Vec<Decision>, empty: Certificate) -> Decision {
    if let Some(d) = decisions.iter().find(|d| d.is_feasible()) {
        return d.clone();
    }
    if decisions.iter().any(|d| d.verdict == Verdict::Inconclusive) {
        return Decision::inconclusive();
    }
    decisions.into_iter().next().unwrap_or_else(|| Decision::infeasible(empty))
}

const ASSIGNMENT_CAP: usize = 5_000;

fn ext_decide(a: &Hermitian, b: &Hermitian, l: &SpectralList, mode: Mode) -> Result<(Decision, Option<MembershipChain>)> {
    if a.order() != b.order() || l.order() != b.order() {
        return Err(Error::DimensionMismatch { expected: b.order(), found: a.order() });
    }
    let res = SearchResolution::default();
    let mut decisions = Vec::new();
    for eta in group_assignments(a.spectrum().values(), l, ASSIGNMENT_CAP) {
        let (d, chain) = membership_chain(&eta, b, l, mode, &res)?;
        if d.is_feasible() {
            return Ok((d, chain));
        }
        decisions.push(d);
    }
    let empty = Certificate::Structure(format!("spectrum of A cannot be arranged along the list {l}"));
    Ok((combine(decisions, empty), None))
}

/// `A ≺_𝐥 B`: the unitary orbit of `A` meets the conditional expectation
/// of the unitary orbit of `B`.
pub fn ext_majorizes(a: &Hermitian, b: &Hermitian, l: &SpectralList) -> Result<Decision> {
    Ok(ext_decide(a, b, l, Mode::Unitary)?.0)
}

/// `A ≺_{𝐥,w} B` for PSD `A`, `B`: contractive orbit in place of the
/// unitary one.
pub fn ext_submajorizes(a: &Psd, b: &Psd, l: &SpectralList) -> Result<Decision> {
    Ok(ext_decide(a.hermitian(), b.hermitian(), l, Mode::Contractive)?.0)
}

/// `U` with `tce(U*BU) = U′*AU′`.
#[derive(Debug, Clone)]
pub struct ExpectationWitness {
    pub u: Unitary,
    pub u_prime: Unitary,
    /// `‖tce(U*BU) − U′*AU′‖_max`.
    pub residual: f64,
}

fn finish_expectation(a: &Hermitian, b: &Hermitian, l: &SpectralList, u: Unitary) -> Result<ExpectationWitness> {
    let t = Hermitian::symmetrized(tce(l, u.conjugate(b).matrix())?);
    let (_, va) = eig_sorted(a);
    let (_, vt) = eig_sorted(&t);
    let u_prime = Unitary::new(va.matrix() * vt.matrix().adjoint())?;
    let residual = max_abs_diff(t.matrix(), u_prime.conjugate(a).matrix());
    Ok(ExpectationWitness { u, u_prime, residual })
}

/// Builds `U` realizing `A ≺_𝐥 B`. Block spectra come from the chain found
/// by [`ext_majorizes`]; their realization and the per-group sums are
/// delegated to the orbit oracle.
pub fn construct_expectation_witness(
    a: &Hermitian,
    b: &Hermitian,
    l: &SpectralList,
    budget: &OracleBudget,
) -> Result<ExpectationWitness> {
    let n = b.order();
    if a.order() != n || l.order() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.order() });
    }
    let tol = TOL.witness * scale(b.matrix()).max(scale(a.matrix()));
    if max_abs_diff(&tce(l, b.matrix())?, a.matrix()) <= tol {
        return finish_expectation(a, b, l, Unitary::identity(n));
    }
    let (decision, chain) = ext_decide(a, b, l, Mode::Unitary)?;
    let chain = match (decision.verdict, chain) {
        (Verdict::Feasible, Some(c)) => c,
        (Verdict::Inconclusive, _) => {
            return Err(Error::Precondition("membership is inconclusive at the search resolution".into()))
        }
        _ => return Err(Error::Infeasible(format!("A is not 𝐥-majorized by B for {l}"))),
    };
    let (lb, vb) = eig_sorted(b);
    if l.pairs() == [(n, 1)] {
        let (_, va) = eig_sorted(a);
        return finish_expectation(a, b, l, Unitary::new(vb.matrix() * va.matrix().adjoint())?);
    }
    if l.pairs().iter().all(|&p| p == (1, 1)) {
        let m = schur_horn_construct(&chain.eta, lb.values())?;
        let (_, q) = eig_sorted(&m);
        return finish_expectation(a, b, l, Unitary::new(vb.matrix() * q.matrix().adjoint())?);
    }

    let ranks = l.block_system();
    let f = match realize_block_compression(b, &chain.mu, &ranks, Mode::Unitary, budget)? {
        o if o.found() => match o.witness {
            Some(Witness::Unitary(u)) => u,
            _ => return Err(Error::BudgetExhausted(o.residual)),
        },
        o => return Err(Error::BudgetExhausted(o.residual)),
    };
    let blocks = compress(&ranks, f.conjugate(b).matrix())?.into_blocks();
    let mut w_blocks = Vec::with_capacity(blocks.len());
    for (&(_, c), t) in l.pairs().iter().zip(l.offsets()) {
        let group_blocks = &blocks[t..t + c];
        if c == 1 {
            let (_, q) = eig_sorted(&Hermitian::symmetrized(group_blocks[0].clone()));
            w_blocks.push(q.into_matrix());
            continue;
        }
        let target = Spectrum::new(chain.lambda[t].values().iter().map(|v| v * c as f64).collect());
        let mus: Vec<Spectrum> = chain.mu[t..t + c].to_vec();
        let out = realize_spectra_sum(&target, &mus, budget)?;
        let Some(Witness::Unitaries(us)) = out.found().then_some(out.witness).flatten() else {
            return Err(Error::BudgetExhausted(out.residual));
        };
        for (blk, uj) in group_blocks.iter().zip(us) {
            let (_, q) = eig_sorted(&Hermitian::symmetrized(blk.clone()));
            w_blocks.push(q.matrix() * uj.matrix().adjoint());
        }
    }
    let w = Unitary::new(direct_sum(&w_blocks))?;
    finish_expectation(a, b, l, f.compose(&w))
}

/// Output of the non-commutative Horn lemma for `A` of order `d·m`.
#[derive(Debug, Clone)]
pub struct HornLemma {
    /// Every diagonal `d × d` block of `U*AU` equals `D/m`.
    pub u: Unitary,
    pub d: Psd,
    /// `X_i` of size `(d·m) × d` with `A = (1/m) Σ X_i X_i*`.
    pub factors: Vec<CMatrix>,
    /// `U_i` with `U_i* X_i X_i* U_i = ⊕_j δ_ij D`.
    pub factor_unitaries: Vec<Unitary>,
    /// Largest deviation of a compressed block from `D/m`.
    pub residual: f64,
}

/// Block Fourier unitary `(ξ^{jk}/√m · 1_d)_{j,k}` with `ξ = e^{2πi/m}`.
pub fn block_fourier(d: usize, m: usize) -> Unitary {
    let s = 1.0 / (m as f64).sqrt();
    let f = CMatrix::from_fn(m, m, |j, k| {
        Complex64::from_polar(s, 2.0 * std::f64::consts::PI * ((j * k) % m) as f64 / m as f64)
    });
    Unitary::new(tensor(&identity(d), &f)).expect("block Fourier matrix is unitary")
}

pub fn nc_horn_lemma(a: &Psd, d: usize, m: usize) -> Result<HornLemma> {
    let n = a.order();
    if d == 0 || m == 0 || n != d * m {
        return Err(Error::DimensionMismatch { expected: d * m, found: n });
    }
    let (la, w) = eig_sorted(a.hermitian());
    let mut dsum = vec![0.0; d];
    for (k, v) in la.values().iter().enumerate() {
        dsum[k % d] += v;
    }
    let dmat = Psd::from_diagonal(&dsum)?;
    // diagonalize first, Fourier second
    let u = w.compose(&block_fourier(d, m));
    let p = ProjectionSystem::new(vec![d; m])?;
    let blocks = compress(&p, u.conjugate(a.hermitian()).matrix())?;
    let avg = dmat.matrix().map(|z| z / m as f64);
    let residual = blocks.blocks().iter().map(|b| max_abs_diff(b, &avg)).fold(0.0, f64::max);

    let scaled = Psd::new(a.hermitian().scaled(m as f64))?;
    let factor_unitaries: Vec<Unitary> = witness_unitaries_from_contraction(&scaled, &Contraction::from(u.clone()), &p)?
        .into_iter()
        .map(|v| v.adjoint())
        .collect();
    let root = scaled.sqrt();
    let factors = p
        .intervals()
        .into_iter()
        .map(|(s, e)| root.matrix() * u.matrix().columns(s, e - s))
        .collect();
    Ok(HornLemma { u, d: dmat, factors, factor_unitaries, residual })
}

/// Objects exhibiting non-convexity of `𝒞_𝒫(𝒰_n(S))`.
#[derive(Debug, Clone)]
pub struct ConvexityCounterexample {
    pub s: Hermitian,
    pub v: Unitary,
    /// `(𝒞_𝒫(S) + 𝒞_𝒫(V*SV)) / 2`.
    pub t: Hermitian,
    /// `‖T − (𝒞_𝒫(S) + 𝒞_𝒫(V*SV))/2‖_max`.
    pub midpoint_residual: f64,
    pub decision: Decision,
}

/// `S = Diag(2, 4) ⊕ 0`, `V` swapping the first two coordinates; the
/// midpoint `T = Diag(3, 3) ⊕ 0` of two compressed orbit points is not in
/// the compressed orbit.
pub fn convexity_counterexample(n: usize, ranks: &ProjectionSystem) -> Result<ConvexityCounterexample> {
    if ranks.order() != n || n < 2 {
        return Err(Error::DimensionMismatch { expected: n.max(2), found: ranks.order() });
    }
    if ranks.ranks()[0] < 2 {
        return Err(Error::Precondition("the first block must have rank at least 2".into()));
    }
    let mut sd = vec![0.0; n];
    sd[0] = 2.0;
    sd[1] = 4.0;
    let s = Hermitian::from_diagonal(&sd);
    let mut perm = identity(n);
    perm.swap_columns(0, 1);
    let v = Unitary::new(perm)?;
    let c1 = compress_matrix(ranks, s.matrix())?;
    let c2 = compress_matrix(ranks, v.conjugate(&s).matrix())?;
    let mid = (&c1 + &c2).map(|z| z * 0.5);
    let mut td = vec![0.0; n];
    td[0] = 3.0;
    td[1] = 3.0;
    let t = Hermitian::from_diagonal(&td);
    let midpoint_residual = max_abs_diff(t.matrix(), &mid);
    let targets: Vec<Spectrum> = compress(ranks, t.matrix())?
        .into_blocks()
        .into_iter()
        .map(|b| Hermitian::symmetrized(b).spectrum())
        .collect();
    let decision = block_feasible_unitary(&s.spectrum(), &targets, ranks, None)?;
    Ok(ConvexityCounterexample { s, v, t, midpoint_residual, decision })
}

/// `f(𝒞_𝒫(A)) ≲ 𝒞_𝒫(f(A))` for monotone convex nonnegative `f`.
pub fn jensen_check(f: &dyn Fn(f64) -> f64, a: &Hermitian, p: &ProjectionSystem) -> Result<bool> {
    jensen_check_scaled(f, a, p, 1.0)
}

/// [`jensen_check`] with the dominance tolerance multiplied by `factor`.
pub fn jensen_check_scaled(f: &dyn Fn(f64) -> f64, a: &Hermitian, p: &ProjectionSystem, factor: f64) -> Result<bool> {
    let fa = apply_function(f, a)?;
    let upper = Hermitian::symmetrized(compress_matrix(p, fa.matrix())?);
    let lower = apply_function(f, &Hermitian::symmetrized(compress_matrix(p, a.matrix())?))?;
    let (lu, ll) = (upper.spectrum(), lower.spectrum());
    let tol = factor * TOL.dominance * lu.max_abs().max(ll.max_abs()).max(1.0);
    Ok(lu.values().iter().zip(ll.values()).all(|(u, l)| *u >= l - tol))
}

/// A contraction `W̃` with `𝒞_𝒫(W̃* f(B) W̃) = f(A)` where
/// `A = 𝒞_𝒫(W*BW)`, for convex `f ≥ 0` with `f(0) = 0`.
pub fn monotone_transport(
    f: &dyn Fn(f64) -> f64,
    b: &Psd,
    w: &Contraction,
    p: &ProjectionSystem,
) -> Result<Contraction> {
    let n = b.order();
    if w.order() != n || p.order() != n {
        return Err(Error::DimensionMismatch { expected: n, found: w.order() });
    }
    let fb = Psd::new(apply_function(f, b.hermitian())?)?;
    let root = fb.sqrt();
    let a_blocks = compress(p, &(w.matrix().adjoint() * b.matrix() * w.matrix()))?;
    let mut f_blocks = Vec::with_capacity(p.len());
    let mut vs = Vec::with_capacity(p.len());
    for (i, (s, e)) in p.intervals().into_iter().enumerate() {
        let fa = Psd::new(apply_function(f, &Hermitian::symmetrized(a_blocks.blocks()[i].clone()))?)?;
        let mut wp = CMatrix::zeros(n, n);
        wp.columns_mut(s, e - s).copy_from(&w.matrix().columns(s, e - s));
        let g = Hermitian::symmetrized(root.matrix() * &wp * wp.adjoint() * root.matrix());
        let embedded = Hermitian::symmetrized(embed_block(p, i, fa.matrix()));
        let y = align_order(&embedded, &g).map_err(|e| match e {
            Error::DominanceViolated { index, upper, lower } => Error::Precondition(format!(
                "block {i}: dominance fails at eigenvalue {index} ({upper} < {lower})"
            )),
            other => other,
        })?;
        vs.push(y.adjoint());
        f_blocks.push(fa);
    }
    witness_contraction_from_unitaries(&fb, &f_blocks, &vs, p)
}

/// Unitaries with `U* f(A) U + V* f(B) V ≤ f(A + B)`.
#[derive(Debug, Clone)]
pub struct BourinDecomposition {
    pub u: Unitary,
    pub v: Unitary,
    /// `λ_min(f(A+B) − U*f(A)U − V*f(B)V)`.
    pub min_eigenvalue: f64,
    /// Whether the orbit oracle replaced the constructive chain.
    pub via_oracle: bool,
}

fn polar_unitary(n_mat: &CMatrix) -> Result<Unitary> {
    let (x, y_t) = svd_parts(n_mat);
    Unitary::new(x * y_t)
}

fn bourin_gap(fa: &Hermitian, fb: &Hermitian, fab: &Hermitian, u: &Unitary, v: &Unitary) -> f64 {
    fab.sub(&u.conjugate(fa)).sub(&v.conjugate(fb)).min_eigenvalue()
}

/// Completes the `(1,1)`-corners of the two unitaries into unitaries of
/// order `n`.
fn bourin_from_contraction(
    fa: &Hermitian,
    fb: &Hermitian,
    fbig: &Psd,
    wt: &Contraction,
    p: &ProjectionSystem,
    n: usize,
) -> Result<(Unitary, Unitary)> {
    let us = witness_unitaries_from_contraction(fbig, wt, p)?;
    let ra = Psd::new(fa.clone())?.sqrt();
    let rb = Psd::new(fb.clone())?.sqrt();
    let u11 = us[0].matrix().view((0, 0), (n, n)).into_owned();
    let v21 = us[1].matrix().view((n, 0), (n, n)).into_owned();
    Ok((polar_unitary(&(ra.matrix() * u11))?, polar_unitary(&(rb.matrix() * v21))?))
}

pub fn bourin_decomposition(
    f: &dyn Fn(f64) -> f64,
    a: &Psd,
    b: &Psd,
    budget: &OracleBudget,
) -> Result<BourinDecomposition> {
    let n = a.order();
    if b.order() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.order() });
    }
    let fa = apply_function(f, a.hermitian())?;
    let fb = apply_function(f, b.hermitian())?;
    let sum = Psd::new(a.hermitian().add(b.hermitian()))?;
    let fab = apply_function(f, sum.hermitian())?;
    let tol = TOL.psd * scale(fab.matrix());

    let big = Psd::new(Hermitian::symmetrized(direct_sum(&[sum.matrix().clone(), CMatrix::zeros(n, n)])))?;
    let fbig = Psd::new(apply_function(f, big.hermitian())?)?;
    let k = sum.pinv_sqrt();
    let mut w = CMatrix::from_element(2 * n, 2 * n, ZERO);
    w.view_mut((0, 0), (n, n)).copy_from(&(k.matrix() * a.sqrt().matrix()));
    w.view_mut((0, n), (n, n)).copy_from(&(k.matrix() * b.sqrt().matrix()));
    let p = ProjectionSystem::new(vec![n, n])?;

    let constructive = Contraction::clipped(w)
        .and_then(|w| monotone_transport(f, &big, &w, &p))
        .and_then(|wt| bourin_from_contraction(&fa, &fb, &fbig, &wt, &p, n));
    if let Ok((u, v)) = constructive {
        let gap = bourin_gap(&fa, &fb, &fab, &u, &v);
        if gap >= -tol {
            return Ok(BourinDecomposition { u, v, min_eigenvalue: gap, via_oracle: false });
        }
    }

    let targets = [fa.spectrum(), fb.spectrum()];
    let out = realize_block_compression(fbig.hermitian(), &targets, &p, Mode::Contractive, budget)?;
    let Some(Witness::Contraction(x)) = out.found().then_some(out.witness).flatten() else {
        return Err(Error::BudgetExhausted(out.residual));
    };
    let blocks = compress(&p, &(x.matrix().adjoint() * fbig.matrix() * x.matrix()))?.into_blocks();
    let fix0 = align_order(&Hermitian::symmetrized(blocks[0].clone()), &fa)?;
    let fix1 = align_order(&Hermitian::symmetrized(blocks[1].clone()), &fb)?;
    let fix = direct_sum(&[fix0.matrix().adjoint(), fix1.matrix().adjoint()]);
    let wt = Contraction::clipped(x.matrix() * fix)?;
    let (u, v) = bourin_from_contraction(&fa, &fb, &fbig, &wt, &p, n)?;
    let gap = bourin_gap(&fa, &fb, &fab, &u, &v);
    if gap < -tol {
        return Err(Error::BudgetExhausted(-gap));
    }
    Ok(BourinDecomposition { u, v, min_eigenvalue: gap, via_oracle: true })
}

/// Spectra of the diagonal blocks of `X*BX` along `p`.
pub fn block_spectra(m: &CMatrix, p: &ProjectionSystem) -> Result<Vec<Spectrum>> {
    Ok(compress(p, m)?.into_blocks().into_iter().map(|b| Hermitian::symmetrized(b).spectrum()).collect())
}

/// Eigen-blocks `Diag(λ)` realized from a unitary and spectrum.
pub fn realized(values: &[f64], u: &Unitary) -> Hermitian {
    reconstruct(values, u.matrix())
}
