//! Unital *-subalgebras of `M_n(ℂ)` in coordinate form.
//!
//! A [`SpectralList`] `((d(i), c(i)))_i` describes `⊕_i M_{d(i)} ⊗ 1_{c(i)}`
//! placed on consecutive coordinate intervals. Tensor products are identified
//! with block matrices by `A ⊗ B ≈ (b_ij A)`, so `A ⊗ 1_c` is the block
//! diagonal matrix with `c` copies of `A`; every partial trace below relies
//! on that identification.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, ZERO};

/// Classifying list `((d(i), c(i)))_i` of a unital *-subalgebra.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpectralList {
    pairs: Vec<(usize, usize)>,
}

impl SpectralList {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidList("empty list".into()));
        }
        if let Some(&(d, c)) = pairs.iter().find(|(d, c)| *d == 0 || *c == 0) {
            return Err(Error::InvalidList(format!("non-positive entry ({d}, {c})")));
        }
        Ok(Self { pairs })
    }

    /// `((1, 1))ⁿ`, the maximal abelian (diagonal) algebra.
    pub fn diagonal(n: usize) -> Self {
        Self { pairs: vec![(1, 1); n] }
    }

    /// `((n, 1))`, the whole matrix algebra.
    pub fn full(n: usize) -> Self {
        Self { pairs: vec![(n, 1)] }
    }

    /// Multiplicity-free list with the given block sizes.
    pub fn multiplicity_free(dims: &[usize]) -> Result<Self> {
        Self::new(dims.iter().map(|&d| (d, 1)).collect())
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Ambient order `Σ d(i)·c(i)`.
    pub fn order(&self) -> usize {
        self.pairs.iter().map(|(d, c)| d * c).sum()
    }

    pub fn is_multiplicity_free(&self) -> bool {
        self.pairs.iter().all(|&(_, c)| c == 1)
    }

    /// `Σ c(i)`.
    pub fn c_total(&self) -> usize {
        self.pairs.iter().map(|(_, c)| c).sum()
    }

    /// Rank list `k`: `d(i)` repeated `c(i)` times.
    pub fn rank_list(&self) -> Vec<usize> {
        self.pairs.iter().flat_map(|&(d, c)| std::iter::repeat_n(d, c)).collect()
    }

    /// Zero-based offsets `t(i)` of each group inside the rank list.
    pub fn offsets(&self) -> Vec<usize> {
        self.pairs
            .iter()
            .scan(0, |acc, &(_, c)| {
                let t = *acc;
                *acc += c;
                Some(t)
            })
            .collect()
    }

    /// Projection system with ranks `d(i)·c(i)`, one interval per group.
    pub fn group_system(&self) -> ProjectionSystem {
        ProjectionSystem { ranks: self.pairs.iter().map(|(d, c)| d * c).collect() }
    }

    /// Projection system with ranks given by [`rank_list`](Self::rank_list).
    pub fn block_system(&self) -> ProjectionSystem {
        ProjectionSystem { ranks: self.rank_list() }
    }
}

impl fmt::Display for SpectralList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs.iter().map(|(d, c)| format!("{d}:{c}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses `"d:c,d:c,…"`.
impl FromStr for SpectralList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (d, c) = item
                .split_once(':')
                .ok_or_else(|| Error::InvalidList(format!("expected d:c, got {item:?}")))?;
            let parse = |t: &str| {
                t.trim().parse::<usize>().map_err(|_| Error::InvalidList(format!("bad integer {t:?}")))
            };
            pairs.push((parse(d)?, parse(c)?));
        }
        Self::new(pairs)
    }
}

/// Same multiset of `(d, c)` pairs.
pub fn lists_equivalent(l1: &SpectralList, l2: &SpectralList) -> bool {
    let mut a = l1.pairs.clone();
    let mut b = l2.pairs.clone();
    a.sort_unstable();
    b.sort_unstable();
    a == b
}

/// Grouping of `fine`'s blocks into `coarse`'s blocks, when one exists:
/// entry `k` lists the indices of `fine` whose sizes add up to block `k`.
pub fn refinement_partition(fine: &SpectralList, coarse: &SpectralList) -> Result<Option<Vec<Vec<usize>>>> {
    if !fine.is_multiplicity_free() || !coarse.is_multiplicity_free() {
        return Err(Error::InvalidList("refinement is defined for multiplicity-free lists".into()));
    }
    if fine.order() != coarse.order() {
        return Ok(None);
    }
    let sizes: Vec<usize> = fine.pairs.iter().map(|p| p.0).collect();
    let mut room: Vec<usize> = coarse.pairs.iter().map(|p| p.0).collect();
    // place large blocks first
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]));
    let mut assign = vec![usize::MAX; sizes.len()];

    fn place(pos: usize, order: &[usize], sizes: &[usize], room: &mut [usize], assign: &mut [usize]) -> bool {
        if pos == order.len() {
            return room.iter().all(|&r| r == 0);
        }
        let i = order[pos];
        for k in 0..room.len() {
            if room[k] >= sizes[i] {
                room[k] -= sizes[i];
                assign[i] = k;
                if place(pos + 1, order, sizes, room, assign) {
                    return true;
                }
                room[k] += sizes[i];
                assign[i] = usize::MAX;
            }
        }
        false
    }

    if !place(0, &order, &sizes, &mut room, &mut assign) {
        return Ok(None);
    }
    let mut groups = vec![Vec::new(); coarse.len()];
    for (i, &k) in assign.iter().enumerate() {
        groups[k].push(i);
    }
    Ok(Some(groups))
}

/// `fine` refines `coarse`: the algebra of `fine` sits inside an algebra
/// with list `coarse` (after a unitary change of basis).
pub fn refines(fine: &SpectralList, coarse: &SpectralList) -> Result<bool> {
    Ok(refinement_partition(fine, coarse)?.is_some())
}

/// Ordered coordinate projections `P_1, …, P_m` onto consecutive intervals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProjectionSystem {
    ranks: Vec<usize>,
}

impl ProjectionSystem {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        if ranks.is_empty() || ranks.contains(&0) {
            return Err(Error::InvalidProjections(format!("ranks must be positive, got {ranks:?}")));
        }
        Ok(Self { ranks })
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn order(&self) -> usize {
        self.ranks.iter().sum()
    }

    /// Half-open coordinate intervals `[start, end)`.
    pub fn intervals(&self) -> Vec<(usize, usize)> {
        let mut start = 0;
        self.ranks
            .iter()
            .map(|&r| {
                let iv = (start, start + r);
                start += r;
                iv
            })
            .collect()
    }

    fn check(&self, x: &CMatrix) -> Result<()> {
        if x.nrows() != x.ncols() {
            return Err(Error::NotSquare { rows: x.nrows(), cols: x.ncols() });
        }
        if x.nrows() != self.order() {
            return Err(Error::DimensionMismatch { expected: self.order(), found: x.nrows() });
        }
        Ok(())
    }
}

/// Block-diagonal matrix stored as its diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    blocks: Vec<CMatrix>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<CMatrix>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<CMatrix> {
        self.blocks
    }

    pub fn to_matrix(&self) -> CMatrix {
        direct_sum(&self.blocks)
    }

    pub fn trace(&self) -> num_complex::Complex64 {
        self.blocks.iter().map(crate::hermitian::trace).sum()
    }
}

/// `⊕_i X_i`.
pub fn direct_sum(blocks: &[CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((off, off), (k, k)).copy_from(b);
        off += k;
    }
    out
}

/// `n × n` matrix with `block` at diagonal slot `slot` of `p`, zero elsewhere.
pub fn embed_block(p: &ProjectionSystem, slot: usize, block: &CMatrix) -> CMatrix {
    let n = p.order();
    let (start, end) = p.intervals()[slot];
    let mut out = CMatrix::zeros(n, n);
    out.view_mut((start, start), (end - start, end - start)).copy_from(block);
    out
}

/// Diagonal blocks of `X` cut along `P`'s intervals.
pub fn compress(p: &ProjectionSystem, x: &CMatrix) -> Result<BlockDiagonal> {
    p.check(x)?;
    Ok(BlockDiagonal::new(
        p.intervals().into_iter().map(|(s, e)| x.view((s, s), (e - s, e - s)).into_owned()).collect(),
    ))
}

/// `𝒞_𝒫(X) = Σ P_i X P_i` as an `n × n` matrix.
pub fn compress_matrix(p: &ProjectionSystem, x: &CMatrix) -> Result<CMatrix> {
    Ok(compress(p, x)?.to_matrix())
}

fn check_tensor(c: &CMatrix, d: usize, m: usize) -> Result<()> {
    if c.nrows() != c.ncols() {
        return Err(Error::NotSquare { rows: c.nrows(), cols: c.ncols() });
    }
    if d == 0 || m == 0 || c.nrows() != d * m {
        return Err(Error::DimensionMismatch { expected: d * m, found: c.nrows() });
    }
    Ok(())
}

/// `A ⊗ B ≈ (b_ij A)`.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (d, m) = (a.nrows(), b.nrows());
    let mut out = CMatrix::zeros(d * m, d * m);
    for i in 0..m {
        for j in 0..m {
            out.view_mut((i * d, j * d), (d, d)).copy_from(&a.map(|z| z * b[(i, j)]));
        }
    }
    out
}

/// `Tr_m(C) = Σ_i C_ii` over the `m × m` array of `d × d` blocks.
pub fn partial_trace_right(c: &CMatrix, d: usize, m: usize) -> Result<CMatrix> {
    check_tensor(c, d, m)?;
    let mut out = CMatrix::zeros(d, d);
    for i in 0..m {
        out += c.view((i * d, i * d), (d, d));
    }
    Ok(out)
}

/// `Tr_d(C) = (tr C_ij)_{i,j}`.
pub fn partial_trace_left(c: &CMatrix, d: usize, m: usize) -> Result<CMatrix> {
    check_tensor(c, d, m)?;
    Ok(CMatrix::from_fn(m, m, |i, j| {
        (0..d).fold(ZERO, |acc, k| acc + c[(i * d + k, j * d + k)])
    }))
}

/// Trace-preserving conditional expectation onto `⊕ M_{d(i)} ⊗ 1_{c(i)}`:
/// each group block is partial-traced over its `c(i)` copies, averaged, and
/// tensored back with `1_{c(i)}`.
pub fn tce(l: &SpectralList, x: &CMatrix) -> Result<CMatrix> {
    let groups = compress(&l.group_system(), x)?;
    let blocks = groups
        .into_blocks()
        .into_iter()
        .zip(l.pairs())
        .map(|(b, &(d, c))| {
            let avg = partial_trace_right(&b, d, c)?.map(|z| z / c as f64);
            Ok(direct_sum(&vec![avg; c]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(direct_sum(&blocks))
}

/// The `d(i) × d(i)` generators `A_i` of an element `⊕ A_i ⊗ 1_{c(i)}`,
/// read off the first copy of each group.
pub fn algebra_generators(l: &SpectralList, x: &CMatrix) -> Result<Vec<CMatrix>> {
    let groups = compress(&l.group_system(), x)?;
    Ok(groups
        .into_blocks()
        .into_iter()
        .zip(l.pairs())
        .map(|(b, &(d, _))| b.view((0, 0), (d, d)).into_owned())
        .collect())
}
