//! Schubert calculus on Grassmannians and the compatibility inequalities for
//! spectra of (dominated) sums of Hermitian matrices.
//!
//! Conventions: an `r`-subset `I = {i₁ < … < i_r}` of `⟨n⟩` has dual
//! `i′_j = n + 1 − i_{r+1−j}` and Schubert partition
//! `λ_j = (n − r) + j − i_j`, so `{1,…,r}` is the point class and
//! `{n−r+1,…,n}` the fundamental class. A tuple `(I₀, …, I_m)` is admissible
//! when `σ_{λ(I₀)} · Π_j σ_{λ(I_j′)}` is nonzero in `H*(Gr(r, n))`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use crate::decision::{Certificate, Decision, TraceRelation};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::hermitian::{Spectrum, TOL};
use crate::CONVENTIONS_VERSION;

/// Largest ambient size the decision procedures accept: every box has at
/// most 128 partitions, so supports fit in a `u128`.
pub const MAX_ORDER: usize = 9;
/// Default enumeration caps, lifted by [`EnumerationOptions::force`].
pub const ENUMERATION_MAX_N: usize = 6;
pub const ENUMERATION_MAX_M: usize = 4;
/// Environment variable overriding the memo directory.
pub const MEMO_DIR_ENV: &str = "NCMAJ_MEMO_DIR";

/// Strictly increasing one-based indices `I ⊂ ⟨n⟩` with `1 ≤ |I| < n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetIndex {
    n: usize,
    elems: Vec<usize>,
}

impl SubsetIndex {
    pub fn new(n: usize, elems: Vec<usize>) -> Result<Self> {
        if elems.is_empty() || elems.len() >= n {
            return Err(Error::InvalidSubset(format!("need 1 <= |I| < n = {n}, got |I| = {}", elems.len())));
        }
        if elems.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSubset(format!("{elems:?} is not strictly increasing")));
        }
        if elems[0] == 0 || elems[elems.len() - 1] > n {
            return Err(Error::InvalidSubset(format!("{elems:?} leaves 1..={n}")));
        }
        Ok(Self { n, elems })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn elems(&self) -> &[usize] {
        &self.elems
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    /// Parses `"1,3"` for a given ambient size.
    pub fn parse(n: usize, s: &str) -> Result<Self> {
        let elems = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidSubset(format!("{s:?}: {e}")))?;
        Self::new(n, elems)
    }

    fn csv(&self) -> String {
        let parts: Vec<String> = self.elems.iter().map(|i| i.to_string()).collect();
        parts.join(",")
    }
}

impl fmt::Display for SubsetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.csv())
    }
}

/// Young diagram inside the `r × width` box; zero parts are dropped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoxPartition {
    r: usize,
    width: usize,
    parts: Vec<usize>,
}

impl BoxPartition {
    pub fn new(r: usize, width: usize, mut parts: Vec<usize>) -> Result<Self> {
        while parts.last() == Some(&0) {
            parts.pop();
        }
        if parts.len() > r {
            return Err(Error::InvalidPartition(format!("{parts:?} has more than {r} rows")));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidPartition(format!("{parts:?} is not non-increasing")));
        }
        if parts.first().is_some_and(|&p| p > width) {
            return Err(Error::InvalidPartition(format!("{parts:?} exceeds width {width}")));
        }
        Ok(Self { r, width, parts })
    }

    pub fn empty(r: usize, width: usize) -> Self {
        Self { r, width, parts: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.r
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    /// `|λ|`, the codimension of the Schubert class.
    pub fn size(&self) -> usize {
        self.parts.iter().sum()
    }

    fn part(&self, i: usize) -> usize {
        self.parts.get(i).copied().unwrap_or(0)
    }

    fn contains(&self, other: &BoxPartition) -> bool {
        other.parts.len() <= self.parts.len() && other.parts.iter().zip(&self.parts).all(|(a, b)| a <= b)
    }

    /// Subset whose Schubert partition this is.
    pub fn to_subset(&self) -> Result<SubsetIndex> {
        let (r, w) = (self.r, self.width);
        SubsetIndex::new(r + w, (1..=r).map(|j| w + j - self.part(j - 1)).collect())
    }
}

impl fmt::Display for BoxPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Admissible `(I₀, …, I_m)`, all of cardinality `r`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdmissibleTuple {
    pub n: usize,
    pub r: usize,
    pub subsets: Vec<SubsetIndex>,
}

impl AdmissibleTuple {
    /// `(λ⁰[I₀′], Σ_j λʲ[I_j′])`; the inequality asks `lhs ≥ rhs`.
    pub fn sides(&self, l0: &[f64], ls: &[&[f64]]) -> Result<(f64, f64)> {
        if ls.len() + 1 != self.subsets.len() {
            return Err(Error::DimensionMismatch { expected: self.subsets.len() - 1, found: ls.len() });
        }
        let lhs = subset_sum(l0, &dual_subset(&self.subsets[0]))?;
        let mut rhs = 0.0;
        for (l, s) in ls.iter().zip(&self.subsets[1..]) {
            rhs += subset_sum(l, &dual_subset(s))?;
        }
        Ok((lhs, rhs))
    }

    /// Canonical memo line, e.g. `1,2;1,3;2,3`.
    pub fn to_line(&self) -> String {
        let parts: Vec<String> = self.subsets.iter().map(SubsetIndex::csv).collect();
        parts.join(";")
    }

    fn from_line(n: usize, line: &str) -> Result<Self> {
        let subsets = line.split(';').map(|s| SubsetIndex::parse(n, s)).collect::<Result<Vec<_>>>()?;
        let r = subsets.first().map(SubsetIndex::len).unwrap_or(0);
        Ok(Self { n, r, subsets })
    }
}

impl fmt::Display for AdmissibleTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.subsets.iter().map(|s| s.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

pub fn dual_subset(i: &SubsetIndex) -> SubsetIndex {
    let n = i.n;
    SubsetIndex { n, elems: i.elems.iter().rev().map(|&e| n + 1 - e).collect() }
}

/// `x[I] = Σ_{i∈I} x_i`.
pub fn subset_sum(x: &[f64], i: &SubsetIndex) -> Result<f64> {
    if x.len() != i.n {
        return Err(Error::DimensionMismatch { expected: i.n, found: x.len() });
    }
    Ok(i.elems.iter().map(|&k| x[k - 1]).sum())
}

pub fn partition_from_subset(i: &SubsetIndex) -> BoxPartition {
    let (n, r) = (i.n, i.len());
    let parts = i.elems.iter().enumerate().map(|(j, &e)| n - r + j + 1 - e).collect();
    BoxPartition::new(r, n - r, parts).expect("subset partitions fit the box")
}

/// All `r`-subsets of `⟨n⟩` in lexicographic order.
pub fn subsets_of(n: usize, r: usize) -> Vec<SubsetIndex> {
    let mut out = Vec::new();
    if r == 0 || r >= n {
        return out;
    }
    let mut cur: Vec<usize> = (1..=r).collect();
    loop {
        out.push(SubsetIndex { n, elems: cur.clone() });
        let Some(k) = (0..r).rev().find(|&k| cur[k] < n - (r - 1 - k)) else { break };
        cur[k] += 1;
        for t in k + 1..r {
            cur[t] = cur[t - 1] + 1;
        }
    }
    out
}

/// Littlewood-Richardson coefficient `c^ν_{λμ}`, counting skew tableaux of
/// shape `ν/λ` and content `μ` whose reverse reading word is a lattice word.
pub fn lr_coefficient(lambda: &BoxPartition, mu: &BoxPartition, nu: &BoxPartition) -> u64 {
    lr_count(&nu.parts, &lambda.parts, &mu.parts, u64::MAX)
}

fn lr_count(outer: &[usize], inner: &[usize], content: &[usize], limit: u64) -> u64 {
    let osize: usize = outer.iter().sum();
    let isize: usize = inner.iter().sum();
    let csize: usize = content.iter().sum();
    if inner.len() > outer.len() || inner.iter().zip(outer).any(|(a, b)| a > b) || osize != isize + csize {
        return 0;
    }
    if csize == 0 {
        return 1;
    }
    let inner_at = |i: usize| inner.get(i).copied().unwrap_or(0);
    let cells: Vec<(usize, usize)> = (0..outer.len())
        .flat_map(|i| (inner_at(i)..outer[i]).rev().map(move |j| (i, j)))
        .collect();
    let mut grid: Vec<Vec<usize>> = outer.iter().map(|&w| vec![0; w]).collect();
    let mut counts = vec![0usize; content.len() + 1];
    let mut found = 0u64;

    struct Ctx<'a> {
        cells: &'a [(usize, usize)],
        outer: &'a [usize],
        inner: &'a [usize],
        content: &'a [usize],
        limit: u64,
    }

    fn go(ctx: &Ctx, k: usize, grid: &mut [Vec<usize>], counts: &mut [usize], found: &mut u64) {
        if *found >= ctx.limit {
            return;
        }
        if k == ctx.cells.len() {
            *found += 1;
            return;
        }
        let (i, j) = ctx.cells[k];
        let hi = if j + 1 < ctx.outer[i] { grid[i][j + 1] } else { ctx.content.len() };
        let lo = if i > 0 && j >= ctx.inner.get(i - 1).copied().unwrap_or(0) { grid[i - 1][j] + 1 } else { 1 };
        for v in lo..=hi.min(ctx.content.len()) {
            if counts[v] >= ctx.content[v - 1] || (v > 1 && counts[v] >= counts[v - 1]) {
                continue;
            }
            counts[v] += 1;
            grid[i][j] = v;
            go(ctx, k + 1, grid, counts, found);
            counts[v] -= 1;
        }
    }

    let ctx = Ctx { cells: &cells, outer, inner, content, limit };
    go(&ctx, 0, &mut grid, &mut counts, &mut found);
    found
}

/// Ring structure of `H*(Gr(r, n))` on the Schubert basis, indexed like
/// [`subsets_of`]: basis element `k` is `σ_{λ(subsets[k])}`.
struct Grassmannian {
    subsets: Vec<SubsetIndex>,
    index: HashMap<Vec<usize>, usize>,
    dual: Vec<usize>,
    /// `support[a * len + b]`: classes occurring in `σ_a · σ_b`.
    support: Vec<u128>,
}

impl Grassmannian {
    fn build(r: usize, n: usize) -> Self {
        let subsets = subsets_of(n, r);
        let partitions: Vec<BoxPartition> = subsets.iter().map(partition_from_subset).collect();
        let index: HashMap<Vec<usize>, usize> =
            subsets.iter().enumerate().map(|(k, s)| (s.elems.clone(), k)).collect();
        let dual = subsets.iter().map(|s| index[&dual_subset(s).elems]).collect();
        let p = subsets.len();
        let rows = exec::map_range(Execution::Parallel, p, |a| {
            (0..p)
                .map(|b| {
                    let size = partitions[a].size() + partitions[b].size();
                    let mut bits = 0u128;
                    for (c, nu) in partitions.iter().enumerate() {
                        if nu.size() == size
                            && nu.contains(&partitions[a])
                            && nu.contains(&partitions[b])
                            && lr_count(&nu.parts, &partitions[a].parts, &partitions[b].parts, 1) > 0
                        {
                            bits |= 1 << c;
                        }
                    }
                    bits
                })
                .collect::<Vec<u128>>()
        });
        Self { subsets, index, dual, support: rows.concat() }
    }

    fn len(&self) -> usize {
        self.subsets.len()
    }

    fn class_of(&self, p: &BoxPartition) -> Result<usize> {
        let s = p.to_subset()?;
        Ok(self.index[&s.elems])
    }

    /// Support of `(Σ_{a ∈ state} σ_a) · σ_b`.
    fn times(&self, state: u128, b: usize) -> u128 {
        let p = self.len();
        let mut out = 0u128;
        let mut rest = state;
        while rest != 0 {
            let a = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            out |= self.support[a * p + b];
        }
        out
    }
}

fn grassmannian(r: usize, n: usize) -> Result<Arc<Grassmannian>> {
    if r == 0 || r >= n {
        return Err(Error::InvalidPartition(format!("need 1 <= r < n, got r = {r}, n = {n}")));
    }
    if n > MAX_ORDER {
        return Err(Error::CapExceeded(format!("order {n} exceeds the supported maximum {MAX_ORDER}")));
    }
    type Cache = Mutex<HashMap<(usize, usize), Arc<Grassmannian>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(g) = cache.lock().expect("cache poisoned").get(&(r, n)) {
        return Ok(g.clone());
    }
    let g = Arc::new(Grassmannian::build(r, n));
    Ok(cache.lock().expect("cache poisoned").entry((r, n)).or_insert(g).clone())
}

fn check_box(partitions: &[BoxPartition], r: usize, n: usize) -> Result<()> {
    if r == 0 || r >= n {
        return Err(Error::InvalidPartition(format!("need 1 <= r < n, got r = {r}, n = {n}")));
    }
    for p in partitions {
        if p.r != r || p.width != n - r {
            return Err(Error::InvalidPartition(format!(
                "{p} lives in a {}x{} box, expected {r}x{}",
                p.r,
                p.width,
                n - r
            )));
        }
    }
    Ok(())
}

/// Full expansion of `Π σ_{λ_k}` in the Schubert basis of `H*(Gr(r, n))`.
pub fn schubert_expansion(partitions: &[BoxPartition], r: usize, n: usize) -> Result<BTreeMap<BoxPartition, u128>> {
    check_box(partitions, r, n)?;
    let w = n - r;
    let all: Vec<BoxPartition> = subsets_of(n, r).iter().map(partition_from_subset).collect();
    let mut acc: BTreeMap<BoxPartition, u128> = BTreeMap::from([(BoxPartition::empty(r, w), 1)]);
    for mu in partitions {
        let mut next = BTreeMap::new();
        for (lambda, &c) in &acc {
            for nu in &all {
                if nu.size() != lambda.size() + mu.size() || !nu.contains(lambda) || !nu.contains(mu) {
                    continue;
                }
                let k = lr_coefficient(lambda, mu, nu);
                if k > 0 {
                    *next.entry(nu.clone()).or_insert(0) += c * k as u128;
                }
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Whether `Π σ_{λ_k} ≠ 0` in `H*(Gr(r, n))`.
pub fn schubert_product_nonzero(partitions: &[BoxPartition], r: usize, n: usize) -> Result<bool> {
    check_box(partitions, r, n)?;
    if partitions.iter().map(BoxPartition::size).sum::<usize>() > r * (n - r) {
        return Ok(false);
    }
    if n > MAX_ORDER {
        return Ok(!schubert_expansion(partitions, r, n)?.is_empty());
    }
    let g = grassmannian(r, n)?;
    let mut state = 1u128 << g.class_of(&BoxPartition::empty(r, n - r))?;
    for p in partitions {
        state = g.times(state, g.class_of(p)?);
        if state == 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Admissibility of `(I₀, …, I_m)`.
pub fn is_admissible(tuple: &[SubsetIndex]) -> Result<bool> {
    let Some(first) = tuple.first() else {
        return Err(Error::InvalidSubset("empty tuple".into()));
    };
    let (n, r) = (first.n, first.len());
    if tuple.iter().any(|s| s.n != n || s.len() != r) {
        return Err(Error::InvalidSubset("ragged tuple".into()));
    }
    let mut parts = vec![partition_from_subset(first)];
    parts.extend(tuple[1..].iter().map(|s| partition_from_subset(&dual_subset(s))));
    schubert_product_nonzero(&parts, r, n)
}

/// On-disk cache of admissible tuples, one file per `(n, m, r)`.
#[derive(Debug, Clone)]
pub struct MemoStore {
    dir: PathBuf,
}

impl MemoStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$NCMAJ_MEMO_DIR`, else `ncmaj-memo` under the system temp directory.
    pub fn from_env() -> Self {
        match std::env::var_os(MEMO_DIR_ENV) {
            Some(d) if !d.is_empty() => Self::new(d),
            _ => Self::new(std::env::temp_dir().join("ncmaj-memo")),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, n: usize, m: usize, r: usize) -> PathBuf {
        self.dir.join(format!("admissible-n{n}-m{m}-r{r}.txt"))
    }

    fn header(n: usize, m: usize, r: usize, count: usize) -> String {
        format!("# ncmaj admissible tuples\n# conventions: {CONVENTIONS_VERSION}\n# n={n} m={m} r={r} count={count}\n")
    }

    /// Cached tuples, or `None` when absent, stale or unreadable.
    pub fn load(&self, n: usize, m: usize, r: usize) -> Option<Vec<AdmissibleTuple>> {
        let text = fs::read_to_string(self.path(n, m, r)).ok()?;
        let mut lines = text.lines();
        let head: Vec<&str> = lines.by_ref().take(3).collect();
        if head.len() != 3 || head[1] != format!("# conventions: {CONVENTIONS_VERSION}") {
            return None;
        }
        let count: usize = head[2].rsplit("count=").next()?.parse().ok()?;
        let tuples = lines
            .filter(|l| !l.is_empty())
            .map(|l| AdmissibleTuple::from_line(n, l))
            .collect::<Result<Vec<_>>>()
            .ok()?;
        (tuples.len() == count && tuples.iter().all(|t| t.r == r && t.subsets.len() == m + 1)).then_some(tuples)
    }

    /// Writes atomically; concurrent writers in this process are serialized.
    pub fn store(&self, n: usize, m: usize, r: usize, tuples: &[AdmissibleTuple]) -> Result<()> {
        static WRITE: Mutex<()> = Mutex::new(());
        let _guard = WRITE.lock().unwrap_or_else(|e| e.into_inner());
        fs::create_dir_all(&self.dir)?;
        let path = self.path(n, m, r);
        let tmp = self.dir.join(format!(".admissible-n{n}-m{m}-r{r}.{}.tmp", std::process::id()));
        let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
        f.write_all(Self::header(n, m, r, tuples.len()).as_bytes())?;
        for t in tuples {
            writeln!(f, "{}", t.to_line())?;
        }
        f.into_inner().map_err(|e| Error::Memo(e.to_string()))?.sync_all()?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EnumerationOptions {
    /// Lift the default `n` and `m` caps.
    pub force: bool,
    pub memo: Option<MemoStore>,
    pub exec: Execution,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self { force: false, memo: Some(MemoStore::from_env()), exec: Execution::Parallel }
    }
}

/// Every admissible `(m+1)`-tuple over `1 ≤ r < n`, ordered by `r` and then
/// lexicographically.
pub fn enumerate_admissible(n: usize, m: usize, opts: &EnumerationOptions) -> Result<Vec<AdmissibleTuple>> {
    if m == 0 {
        return Err(Error::InvalidList("need at least one summand".into()));
    }
    if !opts.force && (n > ENUMERATION_MAX_N || m > ENUMERATION_MAX_M) {
        return Err(Error::CapExceeded(format!(
            "enumeration capped at n <= {ENUMERATION_MAX_N}, m <= {ENUMERATION_MAX_M} (got n = {n}, m = {m}); force to override"
        )));
    }
    let mut out = Vec::new();
    for r in 1..n {
        if let Some(t) = opts.memo.as_ref().and_then(|s| s.load(n, m, r)) {
            out.extend(t);
            continue;
        }
        let tuples = enumerate_rank(n, m, r, opts.exec)?;
        if let Some(store) = &opts.memo {
            store.store(n, m, r, &tuples)?;
        }
        out.extend(tuples);
    }
    Ok(out)
}

fn enumerate_rank(n: usize, m: usize, r: usize, exec: Execution) -> Result<Vec<AdmissibleTuple>> {
    let g = grassmannian(r, n)?;
    let p = g.len();

    fn dfs(g: &Grassmannian, m: usize, state: u128, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if path.len() == m + 1 {
            out.push(path.clone());
            return;
        }
        for i in 0..g.len() {
            let next = g.times(state, g.dual[i]);
            if next != 0 {
                path.push(i);
                dfs(g, m, next, path, out);
                path.pop();
            }
        }
    }

    let per_first = exec::map_range(exec, p, |i0| {
        let mut out = Vec::new();
        dfs(&g, m, 1u128 << i0, &mut vec![i0], &mut out);
        out
    });
    Ok(per_first
        .into_iter()
        .flatten()
        .map(|idx| AdmissibleTuple { n, r, subsets: idx.into_iter().map(|k| g.subsets[k].clone()).collect() })
        .collect())
}

/// Most violated compatibility inequality `(tuple, lhs, rhs)` over every
/// admissible tuple, maximizing `rhs − lhs`.
///
/// Dynamic program over supports of partial Schubert products: coefficients
/// are nonnegative, so a partial product's support decides which
/// continuations remain admissible.
pub fn worst_inequality(l0: &[f64], ls: &[&[f64]], exec: Execution) -> Result<Option<(AdmissibleTuple, f64, f64)>> {
    let n = l0.len();
    if let Some(bad) = ls.iter().find(|l| l.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
    }
    if n > MAX_ORDER {
        return Err(Error::CapExceeded(format!("order {n} exceeds the supported maximum {MAX_ORDER}")));
    }
    let per_rank = exec::map_range(exec, n.saturating_sub(1), |k| worst_for_rank(l0, ls, k + 1));
    let mut best: Option<(AdmissibleTuple, f64, f64)> = None;
    for cand in per_rank {
        if let Some(c) = cand? {
            if best.as_ref().is_none_or(|b| c.2 - c.1 > b.2 - b.1) {
                best = Some(c);
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Copy)]
struct Node {
    value: f64,
    prev: u128,
    choice: usize,
}

fn worst_for_rank(l0: &[f64], ls: &[&[f64]], r: usize) -> Result<Option<(AdmissibleTuple, f64, f64)>> {
    let n = l0.len();
    let g = grassmannian(r, n)?;
    let p = g.len();
    let sums = |x: &[f64]| -> Vec<f64> { g.subsets.iter().map(|s| s.elems.iter().map(|&k| x[k - 1]).sum()).collect() };
    let s0 = sums(l0);

    // value = Σ_j λʲ[I_j′] − λ⁰[I₀′]; choices are I₀, then each I_j′
    let mut layers: Vec<BTreeMap<u128, Node>> = Vec::with_capacity(ls.len() + 1);
    layers.push(
        (0..p)
            .map(|i| (1u128 << i, Node { value: -s0[g.dual[i]], prev: 0, choice: i }))
            .collect(),
    );
    for l in ls {
        let sj = sums(l);
        let mut next: BTreeMap<u128, Node> = BTreeMap::new();
        for (&state, node) in layers.last().expect("nonempty") {
            for (t, &add) in sj.iter().enumerate() {
                let ns = g.times(state, t);
                if ns == 0 {
                    continue;
                }
                let value = node.value + add;
                match next.get(&ns) {
                    Some(old) if old.value >= value => {}
                    _ => {
                        next.insert(ns, Node { value, prev: state, choice: t });
                    }
                }
            }
        }
        layers.push(next);
    }

    let last = layers.last().expect("nonempty");
    let Some((&state, _)) = last
        .iter()
        .fold(None::<(&u128, &Node)>, |acc, (s, nd)| match acc {
            Some((_, b)) if b.value >= nd.value => acc,
            _ => Some((s, nd)),
        })
    else {
        return Ok(None);
    };
    let mut picks = Vec::with_capacity(layers.len());
    let mut cur = state;
    for (depth, layer) in layers.iter().enumerate().rev() {
        let node = layer[&cur];
        picks.push(if depth == 0 { node.choice } else { g.dual[node.choice] });
        cur = node.prev;
    }
    picks.reverse();
    let tuple = AdmissibleTuple { n, r, subsets: picks.iter().map(|&k| g.subsets[k].clone()).collect() };
    let (lhs, rhs) = tuple.sides(l0, ls)?;
    Ok(Some((tuple, lhs, rhs)))
}

fn spectra_tolerance(l0: &Spectrum, ls: &[Spectrum]) -> f64 {
    let scale = ls.iter().fold(l0.max_abs(), |m, l| m.max(l.max_abs())).max(1.0);
    TOL.majorization * scale
}

fn decide(l0: &Spectrum, ls: &[Spectrum], relation: TraceRelation, exec: Execution) -> Result<Decision> {
    if ls.is_empty() {
        return Err(Error::InvalidList("need at least one summand".into()));
    }
    let tol = spectra_tolerance(l0, ls);
    let lhs = l0.sum();
    let rhs: f64 = ls.iter().map(Spectrum::sum).sum();
    for l in ls {
        if l.len() != l0.len() {
            return Err(Error::DimensionMismatch { expected: l0.len(), found: l.len() });
        }
    }
    let trace_ok = match relation {
        TraceRelation::Equal => (lhs - rhs).abs() <= tol,
        TraceRelation::AtLeast => lhs >= rhs - tol,
    };
    if !trace_ok {
        return Ok(Decision::infeasible(Certificate::Trace { relation, lhs, rhs }));
    }
    let views: Vec<&[f64]> = ls.iter().map(Spectrum::values).collect();
    match worst_inequality(l0.values(), &views, exec)? {
        Some((tuple, lhs, rhs)) if rhs - lhs > tol => {
            Ok(Decision::infeasible(Certificate::Inequality { subsets: tuple.subsets, lhs, rhs }))
        }
        _ => Ok(Decision::feasible()),
    }
}

/// Whether Hermitian `A₀ = Σ A_j` exist with the given spectra.
pub fn klyachko_feasible_sum(l0: &Spectrum, ls: &[Spectrum]) -> Result<Decision> {
    decide(l0, ls, TraceRelation::Equal, Execution::Parallel)
}

/// Whether Hermitian `A₀ ≥ Σ A_j` exist with the given spectra.
pub fn klyachko_feasible_dominated(l0: &Spectrum, ls: &[Spectrum]) -> Result<Decision> {
    decide(l0, ls, TraceRelation::AtLeast, Execution::Parallel)
}

pub fn klyachko_feasible_sum_with(l0: &Spectrum, ls: &[Spectrum], exec: Execution) -> Result<Decision> {
    decide(l0, ls, TraceRelation::Equal, exec)
}

impl FromStr for BoxPartition {
    type Err = Error;

    /// `"r,width:p1,p2,…"`.
    fn from_str(s: &str) -> Result<Self> {
        let (shape, parts) = s.split_once(':').ok_or_else(|| Error::InvalidPartition(s.into()))?;
        let dims: Vec<usize> = shape
            .split(',')
            .map(|t| t.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidPartition(s.into()))?;
        let [r, w] = dims[..] else { return Err(Error::InvalidPartition(s.into())) };
        let parts: Vec<usize> = if parts.trim().is_empty() {
            Vec::new()
        } else {
            parts
                .split(',')
                .map(|t| t.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidPartition(s.into()))?
        };
        Self::new(r, w, parts)
    }
}
