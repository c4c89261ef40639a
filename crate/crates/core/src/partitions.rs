//! Set partitions of `{1..n}` and the two lattices the rest of the crate
//! sums over: non-crossing partitions `NC(n)` and interval partitions `Int(n)`.
//!
//! A [`Partition`] is stored as its restricted growth string: element `i`
//! carries the index of its block, blocks numbered in order of their least
//! element. Equality and hashing are therefore canonical.
//!
//! Elements are 1-based in every public signature, matching the ground set
//! `{1..n}`.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::sync::{Arc, OnceLock, RwLock};

use thiserror::Error;

/// Largest `n` for which [`enumerate_nc`] materialises `NC(n)`.
pub const NC_MAX: usize = 14;
/// Largest `n` accepted by [`enumerate_int`].
pub const INT_MAX: usize = 30;
/// Largest `n` for the unrestricted set-partition enumerator.
pub const SET_PARTITION_MAX: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PartitionError {
    #[error("size {n} outside the supported range 1..={max}")]
    Size { n: usize, max: usize },
    #[error("blocks do not partition {{1..{n}}}")]
    NotAPartition { n: usize },
    #[error("partition {0} is crossing")]
    Crossing(String),
    #[error("partition {0} is not an interval partition")]
    NotInterval(String),
    #[error("{lower} is not below {upper} in refinement order")]
    Order { lower: String, upper: String },
    #[error("partitions of different ground sets: {0} vs {1}")]
    GroundSetMismatch(usize, usize),
    #[error("empty tuple has no kernel")]
    EmptyTuple,
    #[error("composition parts must all be at least 1")]
    BadComposition,
}

/// A partition of `{1..n}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    labels: Vec<u8>,
}

impl Partition {
    /// Builds a partition from 1-based blocks in any order.
    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self, PartitionError> {
        if n == 0 || n > u8::MAX as usize {
            return Err(PartitionError::Size { n, max: u8::MAX as usize });
        }
        let mut owner = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(PartitionError::NotAPartition { n });
            }
            for &e in block {
                if e == 0 || e > n || owner[e - 1] != usize::MAX {
                    return Err(PartitionError::NotAPartition { n });
                }
                owner[e - 1] = b;
            }
        }
        if owner.contains(&usize::MAX) {
            return Err(PartitionError::NotAPartition { n });
        }
        Ok(Self::canonical_from(&owner))
    }

    /// Canonicalises an arbitrary block assignment (equal labels share a block).
    fn canonical_from<L: Eq + Hash + Clone>(assign: &[L]) -> Self {
        let mut map: HashMap<L, u8> = HashMap::new();
        let labels = assign
            .iter()
            .map(|l| {
                let next = map.len() as u8;
                *map.entry(l.clone()).or_insert(next)
            })
            .collect();
        Partition { labels }
    }

    /// `0̂ₙ`, all singletons.
    pub fn zero(n: usize) -> Self {
        Partition { labels: (0..n as u8).collect() }
    }

    /// `1̂ₙ`, a single block.
    pub fn one(n: usize) -> Self {
        Partition { labels: vec![0; n] }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn block_count(&self) -> usize {
        self.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    /// Block index (in canonical order) of the 1-based element `e`.
    pub fn block_of(&self, e: usize) -> usize {
        self.labels[e - 1] as usize
    }

    /// Blocks sorted by least element, elements ascending, 1-based.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.block_count()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i + 1);
        }
        out
    }

    /// Block sizes in canonical block order.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.block_count()];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Quadruple scan for `i < j < k < l` with `i, k` in one block and `j, l` in another.
    pub fn is_noncrossing(&self) -> bool {
        let n = self.n();
        let lab = &self.labels;
        for i in 0..n {
            for j in i + 1..n {
                if lab[j] == lab[i] {
                    continue;
                }
                for k in j + 1..n {
                    if lab[k] != lab[i] {
                        continue;
                    }
                    for l in k + 1..n {
                        if lab[l] == lab[j] {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Every block is a run of consecutive integers.
    pub fn is_interval(&self) -> bool {
        // In canonical labelling an interval partition has non-decreasing labels.
        self.labels.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1)
    }

    /// Refinement order: `self ≤ other` iff every block of `self` lies in a block of `other`.
    pub fn refines(&self, other: &Partition) -> bool {
        if self.n() != other.n() {
            return false;
        }
        let mut image = vec![u8::MAX; self.block_count()];
        for (a, b) in self.labels.iter().zip(&other.labels) {
            let slot = &mut image[*a as usize];
            if *slot == u8::MAX {
                *slot = *b;
            } else if *slot != *b {
                return false;
            }
        }
        true
    }

    /// The restriction to a 1-based subset, relabelled to `{1..|subset|}` in increasing order.
    pub fn restrict(&self, subset: &[usize]) -> Partition {
        let labels: Vec<u8> = subset.iter().map(|&e| self.labels[e - 1]).collect();
        Self::canonical_from(&labels)
    }

    /// Kreweras complement of a non-crossing partition.
    ///
    /// Computed as the cycles of `P_π⁻¹ ∘ γ`, where `γ = (1 2 … n)` and `P_π`
    /// cycles each block in increasing order. Satisfies `|π| + |K(π)| = n + 1`.
    pub fn kreweras(&self) -> Result<Partition, PartitionError> {
        if !self.is_noncrossing() {
            return Err(PartitionError::Crossing(self.to_string()));
        }
        Ok(self.kreweras_unchecked())
    }

    pub(crate) fn kreweras_unchecked(&self) -> Partition {
        let n = self.n();
        // next[i]: successor of i inside its block (cyclically); prev is its inverse.
        let mut prev = vec![0usize; n];
        for block in self.blocks() {
            let r = block.len();
            for j in 0..r {
                let cur = block[j] - 1;
                let nxt = block[(j + 1) % r] - 1;
                prev[nxt] = cur;
            }
        }
        // σ(i) = P⁻¹(γ(i)).
        let sigma: Vec<usize> = (0..n).map(|i| prev[(i + 1) % n]).collect();
        let mut assign = vec![usize::MAX; n];
        let mut cycle = 0;
        for start in 0..n {
            if assign[start] != usize::MAX {
                continue;
            }
            let mut i = start;
            while assign[i] == usize::MAX {
                assign[i] = cycle;
                i = sigma[i];
            }
            cycle += 1;
        }
        Self::canonical_from(&assign)
    }

    pub(crate) fn labels(&self) -> &[u8] {
        &self.labels
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for block in self.blocks() {
            write!(f, "{{")?;
            for (i, e) in block.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{e}")?;
            }
            write!(f, "}}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Partition({self})")
    }
}

/// An ordered list of positive parts; in bijection with `Int(degree)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Composition {
    parts: Vec<usize>,
}

impl Composition {
    pub fn new(parts: Vec<usize>) -> Result<Self, PartitionError> {
        if parts.is_empty() || parts.contains(&0) {
            return Err(PartitionError::BadComposition);
        }
        Ok(Composition { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn degree(&self) -> usize {
        self.parts.iter().sum()
    }

    /// The interval partition with consecutive blocks of sizes `parts`.
    pub fn to_partition(&self) -> Partition {
        let mut labels = Vec::with_capacity(self.degree());
        for (b, &p) in self.parts.iter().enumerate() {
            labels.extend(std::iter::repeat_n(b as u8, p));
        }
        Partition { labels }
    }

    /// Block sizes of an interval partition, in order.
    pub fn from_interval(p: &Partition) -> Result<Self, PartitionError> {
        if !p.is_interval() {
            return Err(PartitionError::NotInterval(p.to_string()));
        }
        Ok(Composition { parts: p.block_sizes() })
    }
}

/// n-th Catalan number.
pub fn catalan(n: usize) -> u64 {
    let mut c: u64 = 1;
    for k in 0..n as u64 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    c
}

fn nc_cache() -> &'static RwLock<HashMap<usize, Arc<[Partition]>>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<[Partition]>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// All non-crossing partitions of `{1..n}`, canonical and without duplicates.
///
/// Results are memoised; the returned slice is shared.
pub fn enumerate_nc(n: usize) -> Result<Arc<[Partition]>, PartitionError> {
    if n == 0 || n > NC_MAX {
        return Err(PartitionError::Size { n, max: NC_MAX });
    }
    if let Some(hit) = nc_cache().read().expect("NC cache poisoned").get(&n) {
        return Ok(hit.clone());
    }
    let mut out = Vec::with_capacity(catalan(n) as usize);
    let mut labels = Vec::with_capacity(n);
    let mut mins: Vec<usize> = Vec::with_capacity(n);
    let mut lasts: Vec<usize> = Vec::with_capacity(n);
    grow_nc(n, &mut labels, &mut mins, &mut lasts, &mut out);
    let shared: Arc<[Partition]> = out.into();
    nc_cache().write().expect("NC cache poisoned").insert(n, shared.clone());
    Ok(shared)
}

// Appending element j to block b (last element p) crosses iff some element
// strictly between p and j belongs to a block opened before p.
fn grow_nc(
    n: usize,
    labels: &mut Vec<u8>,
    mins: &mut Vec<usize>,
    lasts: &mut Vec<usize>,
    out: &mut Vec<Partition>,
) {
    let j = labels.len();
    if j == n {
        out.push(Partition { labels: labels.clone() });
        return;
    }
    for b in 0..mins.len() {
        let p = lasts[b];
        let crosses = (p + 1..j).any(|q| mins[labels[q] as usize] < p);
        if crosses {
            continue;
        }
        labels.push(b as u8);
        lasts[b] = j;
        grow_nc(n, labels, mins, lasts, out);
        lasts[b] = p;
        labels.pop();
    }
    labels.push(mins.len() as u8);
    mins.push(j);
    lasts.push(j);
    grow_nc(n, labels, mins, lasts, out);
    mins.pop();
    lasts.pop();
    labels.pop();
}

/// Lazy iterator over `Int(n)`; `2^(n-1)` items, ordered by the cut bitmask.
#[derive(Clone, Debug)]
pub struct IntervalPartitions {
    n: usize,
    next: u64,
    end: u64,
}

impl Iterator for IntervalPartitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.next >= self.end {
            return None;
        }
        let mask = self.next;
        self.next += 1;
        let mut labels = Vec::with_capacity(self.n);
        let mut block = 0u8;
        labels.push(0);
        for i in 1..self.n {
            // bit i-1 set: a new block starts at element i+1.
            if mask >> (i - 1) & 1 == 1 {
                block += 1;
            }
            labels.push(block);
        }
        Some(Partition { labels })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = (self.end - self.next) as usize;
        (rest, Some(rest))
    }
}

impl ExactSizeIterator for IntervalPartitions {}

/// All interval partitions of `{1..n}`, produced lazily.
pub fn enumerate_int(n: usize) -> Result<IntervalPartitions, PartitionError> {
    if n == 0 || n > INT_MAX {
        return Err(PartitionError::Size { n, max: INT_MAX });
    }
    Ok(IntervalPartitions { n, next: 0, end: 1u64 << (n - 1) })
}

/// Every set partition of `{1..n}` (Bell-number many), for brute-force checks.
pub fn enumerate_set_partitions(n: usize) -> Result<Vec<Partition>, PartitionError> {
    if n == 0 || n > SET_PARTITION_MAX {
        return Err(PartitionError::Size { n, max: SET_PARTITION_MAX });
    }
    let mut out = Vec::new();
    let mut labels = vec![0u8];
    fn rec(n: usize, labels: &mut Vec<u8>, max: u8, out: &mut Vec<Partition>) {
        if labels.len() == n {
            out.push(Partition { labels: labels.clone() });
            return;
        }
        for l in 0..=max + 1 {
            labels.push(l);
            rec(n, labels, max.max(l), out);
            labels.pop();
        }
    }
    rec(n, &mut labels, 0, &mut out);
    Ok(out)
}

fn check_pair(sigma: &Partition, pi: &Partition) -> Result<(), PartitionError> {
    if sigma.n() != pi.n() {
        return Err(PartitionError::GroundSetMismatch(sigma.n(), pi.n()));
    }
    if !sigma.refines(pi) {
        return Err(PartitionError::Order { lower: sigma.to_string(), upper: pi.to_string() });
    }
    Ok(())
}

/// `Möb(0̂ₖ, 1̂ₖ)` in `NC(k)`: `(-1)^(k-1) Cat(k-1)`.
fn mobius_nc_full(k: usize) -> i64 {
    let c = catalan(k - 1) as i64;
    if (k - 1).is_multiple_of(2) {
        c
    } else {
        -c
    }
}

/// Möbius function of the `NC(n)` lattice on the interval `[σ, π]`.
///
/// The interval factors over the blocks `V` of `π` into `[σ|_V, 1̂_V]`, and
/// each of those is isomorphic to `[0̂, K(σ|_V)]`, a product of full lattices.
pub fn mobius_nc(sigma: &Partition, pi: &Partition) -> Result<i64, PartitionError> {
    for p in [sigma, pi] {
        if !p.is_noncrossing() {
            return Err(PartitionError::Crossing(p.to_string()));
        }
    }
    check_pair(sigma, pi)?;
    Ok(mobius_nc_unchecked(sigma, pi))
}

pub(crate) fn mobius_nc_unchecked(sigma: &Partition, pi: &Partition) -> i64 {
    let mut value = 1i64;
    for block in pi.blocks() {
        let restricted = sigma.restrict(&block);
        for size in restricted.kreweras_unchecked().block_sizes() {
            value *= mobius_nc_full(size);
        }
    }
    value
}

/// `Möb(π, 1̂)` in `NC(n)`, the weight in the moment-to-cumulant formula.
pub(crate) fn mobius_to_top(pi: &Partition) -> i64 {
    pi.kreweras_unchecked().block_sizes().into_iter().map(mobius_nc_full).product()
}

/// Möbius function of the Boolean lattice `Int(n)`: `(-1)^(|σ| - |π|)`.
pub fn mobius_int(sigma: &Partition, pi: &Partition) -> Result<i64, PartitionError> {
    for p in [sigma, pi] {
        if !p.is_interval() {
            return Err(PartitionError::NotInterval(p.to_string()));
        }
    }
    check_pair(sigma, pi)?;
    Ok(if (sigma.block_count() - pi.block_count()).is_multiple_of(2) { 1 } else { -1 })
}

/// The partition grouping equal labels of a tuple.
pub fn kernel<L: Eq + Hash + Clone>(tuple: &[L]) -> Result<Partition, PartitionError> {
    if tuple.is_empty() {
        return Err(PartitionError::EmptyTuple);
    }
    Ok(Partition::canonical_from(tuple))
}

/// `I(π)`: the largest interval partition below `π`.
///
/// Neighbours `i, i+1` share a block exactly when they share a block of `π`.
pub fn interval_closure(pi: &Partition) -> Partition {
    let lab = pi.labels();
    let mut labels = Vec::with_capacity(lab.len());
    let mut block = 0u8;
    for (i, &l) in lab.iter().enumerate() {
        if i > 0 && l != lab[i - 1] {
            block += 1;
        }
        labels.push(block);
    }
    Partition { labels }
}
