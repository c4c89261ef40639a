//! Free cumulants.
//!
//! Everything here is a sum over `NC(n)`:
//!
//! * `τ_π[a₁,…,aₙ] = ∏_{V∈π} τ[∏_{i∈V} aᵢ]`
//! * `R[a₁,…,aₙ] = Σ_{π∈NC(n)} Möb(π, 1̂ₙ) τ_π[a₁,…,aₙ]`
//! * `τ[a₁⋯aₙ] = Σ_{π∈NC(n)} R_π[a₁,…,aₙ]`
//!
//! The single-variable conversions group `NC(n)` by block-size type first, so
//! exact rational sums touch only a few dozen distinct products per order.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::{Arc, OnceLock, RwLock};

use thiserror::Error;

use crate::partitions::{self, enumerate_nc, Partition, PartitionError};
use crate::scalar::Scalar;

/// Longest sequence accepted by the exact (rational) conversions.
pub const EXACT_MAX: usize = 12;
/// Longest word accepted by [`mixed_free_cumulant`].
pub const MIXED_WORD_MAX: usize = 8;
/// Longest word accepted by [`free_joint_moment`].
pub const JOINT_WORD_MAX: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CumulantError {
    #[error("sequence length {len} exceeds the bound {max}")]
    TooLong { len: usize, max: usize },
    #[error("empty sequence")]
    Empty,
    #[error("moment functional undefined on sub-word {0}")]
    Undefined(String),
    #[error("need {needed} moments, only {have} supplied")]
    InsufficientMoments { needed: usize, have: usize },
    #[error("label {label} has no cumulant sequence in the family")]
    UnknownLabel { label: usize },
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

macro_rules! sequence_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name<S> {
            values: Vec<S>,
        }

        impl<S: Scalar> $name<S> {
            pub fn new(values: Vec<S>) -> Self {
                $name { values }
            }

            /// `values()[k-1]` is the order-`k` term.
            pub fn values(&self) -> &[S] {
                &self.values
            }

            pub fn into_values(self) -> Vec<S> {
                self.values
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            /// Order-`k` term, 1-based.
            pub fn get(&self, k: usize) -> Option<&S> {
                k.checked_sub(1).and_then(|i| self.values.get(i))
            }

            /// Lossy conversion to floats.
            pub fn to_f64(&self) -> $name<f64> {
                $name { values: self.values.iter().map(Scalar::to_float).collect() }
            }

            pub fn truncate(mut self, n: usize) -> Self {
                self.values.truncate(n);
                self
            }
        }
    };
}

sequence_type!(
    /// Moments `m₁, …, mₙ` of a single variable.
    MomentSequence
);
sequence_type!(
    /// Free cumulants `κ₁, …, κₙ` of a single variable.
    CumulantSequence
);

impl<S: Scalar> CumulantSequence<S> {
    /// Cumulants of the ⊞-power `t`: `κₙ ↦ t κₙ`.
    pub fn scale(&self, t: &S) -> Self {
        CumulantSequence { values: self.values.iter().map(|k| k.clone() * t.clone()).collect() }
    }
}

impl<S: Scalar> MomentSequence<S> {
    /// Moments of the dilated variable `s·X`: `mₖ ↦ sᵏ mₖ`.
    pub fn dilate(&self, s: &S) -> Self {
        let mut factor = S::one();
        let values = self
            .values
            .iter()
            .map(|m| {
                factor = factor.clone() * s.clone();
                m.clone() * factor.clone()
            })
            .collect();
        MomentSequence { values }
    }

    /// Moments of a point mass `δ_c`.
    pub fn point_mass(c: S, n: usize) -> Self {
        let mut cur = S::one();
        let values = (0..n)
            .map(|_| {
                cur = cur.clone() * c.clone();
                cur.clone()
            })
            .collect();
        MomentSequence { values }
    }
}

/// `NC(n)` with `Möb(π, 1̂)` attached, plus the same data grouped by block type.
struct NcTable {
    partitions: Arc<[Partition]>,
    mobius: Vec<i64>,
    /// (sorted block sizes, Σ Möb(π,1̂), number of partitions) per block type.
    types: Vec<(Vec<usize>, i64, i64)>,
}

fn nc_table(n: usize) -> Result<Arc<NcTable>, PartitionError> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<NcTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(hit) = cache.read().expect("cumulant cache poisoned").get(&n) {
        return Ok(hit.clone());
    }
    let partitions = enumerate_nc(n)?;
    let mobius: Vec<i64> = partitions.iter().map(partitions::mobius_to_top).collect();
    let mut grouped: HashMap<Vec<usize>, (i64, i64)> = HashMap::new();
    for (p, &mu) in partitions.iter().zip(&mobius) {
        let mut sizes = p.block_sizes();
        sizes.sort_unstable();
        let e = grouped.entry(sizes).or_insert((0, 0));
        e.0 += mu;
        e.1 += 1;
    }
    let mut types: Vec<(Vec<usize>, i64, i64)> =
        grouped.into_iter().map(|(k, (m, c))| (k, m, c)).collect();
    types.sort();
    let table = Arc::new(NcTable { partitions, mobius, types });
    cache.write().expect("cumulant cache poisoned").insert(n, table.clone());
    Ok(table)
}

fn check_len<S: Scalar>(len: usize) -> Result<(), CumulantError> {
    let max = if S::EXACT { EXACT_MAX } else { partitions::NC_MAX };
    if len == 0 {
        return Err(CumulantError::Empty);
    }
    if len > max {
        return Err(CumulantError::TooLong { len, max });
    }
    Ok(())
}

fn product_of<S: Scalar>(values: &[S], sizes: &[usize]) -> S {
    sizes.iter().fold(S::one(), |acc, &s| acc * values[s - 1].clone())
}

/// `τ_π` over a word, given the moment functional on sub-words.
pub fn tau_pi<L, S, F>(pi: &Partition, word: &[L], moments: F) -> Result<S, CumulantError>
where
    L: Clone + std::fmt::Debug,
    S: Scalar,
    F: Fn(&[L]) -> Option<S>,
{
    if pi.n() != word.len() {
        return Err(PartitionError::GroundSetMismatch(pi.n(), word.len()).into());
    }
    let mut acc = S::one();
    for block in pi.blocks() {
        let sub: Vec<L> = block.iter().map(|&e| word[e - 1].clone()).collect();
        let v = moments(&sub).ok_or_else(|| CumulantError::Undefined(format!("{sub:?}")))?;
        acc = acc * v;
    }
    Ok(acc)
}

/// `κₙ = Σ_{π∈NC(n)} Möb(π, 1̂ₙ) ∏_{V∈π} m_{|V|}`.
pub fn moments_to_cumulants<S: Scalar>(
    m: &MomentSequence<S>,
) -> Result<CumulantSequence<S>, CumulantError> {
    check_len::<S>(m.len())?;
    let mut out = Vec::with_capacity(m.len());
    for n in 1..=m.len() {
        let table = nc_table(n)?;
        let mut acc = S::zero();
        for (sizes, mu, _) in &table.types {
            if *mu != 0 {
                acc = acc + S::from_i64(*mu) * product_of(m.values(), sizes);
            }
        }
        out.push(acc);
    }
    Ok(CumulantSequence::new(out))
}

/// `mₙ = Σ_{π∈NC(n)} ∏_{V∈π} κ_{|V|}`.
pub fn cumulants_to_moments<S: Scalar>(
    k: &CumulantSequence<S>,
) -> Result<MomentSequence<S>, CumulantError> {
    check_len::<S>(k.len())?;
    let mut out = Vec::with_capacity(k.len());
    for n in 1..=k.len() {
        let table = nc_table(n)?;
        let mut acc = S::zero();
        for (sizes, _, count) in &table.types {
            acc = acc + S::from_i64(*count) * product_of(k.values(), sizes);
        }
        out.push(acc);
    }
    Ok(MomentSequence::new(out))
}

/// `R[a_{u(1)}, …, a_{u(n)}]` for an arbitrary joint moment functional.
///
/// Sub-word moments are memoised, so an expensive functional (matrix traces)
/// is evaluated at most once per distinct sub-word.
pub fn mixed_free_cumulant<L, S, F>(word: &[L], joint: F) -> Result<S, CumulantError>
where
    L: Clone + Eq + Hash + std::fmt::Debug,
    S: Scalar,
    F: Fn(&[L]) -> Option<S>,
{
    if word.is_empty() {
        return Err(CumulantError::Empty);
    }
    if word.len() > MIXED_WORD_MAX {
        return Err(CumulantError::TooLong { len: word.len(), max: MIXED_WORD_MAX });
    }
    let table = nc_table(word.len())?;
    let memo: RwLock<HashMap<Vec<L>, S>> = RwLock::new(HashMap::new());
    let cached = |sub: &[L]| -> Option<S> {
        if let Some(v) = memo.read().ok()?.get(sub) {
            return Some(v.clone());
        }
        let v = joint(sub)?;
        memo.write().ok()?.insert(sub.to_vec(), v.clone());
        Some(v)
    };
    let mut acc = S::zero();
    for (pi, &mu) in table.partitions.iter().zip(&table.mobius) {
        if mu == 0 {
            continue;
        }
        acc = acc + S::from_i64(mu) * tau_pi(pi, word, cached)?;
    }
    Ok(acc)
}

/// Joint moment `τ[a_{u(1)} ⋯ a_{u(n)}]` of free variables with the given
/// cumulant sequences: the moment-cumulant formula with all mixed cumulants zero,
/// i.e. a sum over `π ∈ NC(n)` with `π ≤ ker(u)`.
pub fn free_joint_moment<S: Scalar>(
    word: &[usize],
    family: &[CumulantSequence<S>],
) -> Result<S, CumulantError> {
    if word.is_empty() {
        return Ok(S::one());
    }
    if word.len() > JOINT_WORD_MAX {
        return Err(CumulantError::TooLong { len: word.len(), max: JOINT_WORD_MAX });
    }
    for &l in word {
        let seq = family.get(l).ok_or(CumulantError::UnknownLabel { label: l })?;
        let count = word.iter().filter(|&&x| x == l).count();
        if seq.len() < count {
            return Err(CumulantError::InsufficientMoments { needed: count, have: seq.len() });
        }
    }
    let ker = partitions::kernel(word)?;
    let table = nc_table(word.len())?;
    let mut acc = S::zero();
    for pi in table.partitions.iter().filter(|p| p.refines(&ker)) {
        let mut term = S::one();
        for block in pi.blocks() {
            let label = word[block[0] - 1];
            term = term * family[label].values()[block.len() - 1].clone();
        }
        acc = acc + term;
    }
    Ok(acc)
}

/// Joint cumulant of power sums of `count` free copies of one variable.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSumCumulant<S> {
    /// `N · R(X^{u(1)}, …, X^{u(k)})`.
    pub joint: S,
    /// `N · (R(X^{u(1)}, …, X^{u(k)}) − m_{u(1)+…+u(k)})`.
    pub defect: S,
}

/// `R(Σᵢ Xᵢ^{u(1)}, …, Σᵢ Xᵢ^{u(k)})` for `count` free, identically distributed
/// summands with moments `m`, together with the defect against `N·m_{Σu}`.
///
/// By freeness the joint cumulant of the sums is `N` times the joint cumulant
/// of one summand, whose joint moments are `τ[X^{u(i₁)}⋯X^{u(iⱼ)}] = m_{Σ u(iₗ)}`.
pub fn power_sum_joint_cumulant<S: Scalar>(
    powers: &[usize],
    m: &MomentSequence<S>,
    count: u64,
) -> Result<PowerSumCumulant<S>, CumulantError> {
    if powers.is_empty() {
        return Err(CumulantError::Empty);
    }
    if powers.contains(&0) {
        return Err(PartitionError::BadComposition.into());
    }
    let total: usize = powers.iter().sum();
    if total > m.len() {
        return Err(CumulantError::InsufficientMoments { needed: total, have: m.len() });
    }
    let word: Vec<usize> = (0..powers.len()).collect();
    let r: S = mixed_free_cumulant(&word, |sub: &[usize]| {
        let deg: usize = sub.iter().map(|&i| powers[i]).sum();
        m.get(deg).cloned()
    })?;
    let n = S::from_i64(count as i64);
    let top = m.values()[total - 1].clone();
    Ok(PowerSumCumulant { joint: n.clone() * r.clone(), defect: n * (r - top) })
}

/// `τ[(ab)ⁿ]` for free `a, b` via `Σ_{π∈NC(n)} κ_π[a] · m_{K(π)}[b]`.
pub(crate) fn kreweras_product_moment<S: Scalar>(
    n: usize,
    kappa_a: &[S],
    m_b: &[S],
) -> Result<S, CumulantError> {
    let table = nc_table(n)?;
    let mut acc = S::zero();
    for pi in table.partitions.iter() {
        let ka = product_of(kappa_a, &pi.block_sizes());
        let mb = product_of(m_b, &pi.kreweras_unchecked().block_sizes());
        acc = acc + ka * mb;
    }
    Ok(acc)
}
