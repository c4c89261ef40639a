//! Exact polynomials in non-commuting variables.
//!
//! Three alphabets appear: power sums `p_k = Σᵢ xᵢᵏ`, the letters `xᵢ`
//! themselves, and variation symbols (`y_j`, or `X, X⁽²⁾, …` for ψₙ). For an
//! interval partition `σ` with blocks `V₁, …, V_r` in order:
//!
//! * `Q_σ = p_{|V₁|} ⋯ p_{|V_r|}` (no constraint on indices),
//! * `P_σ = Σ_{i(1),…,i(r) neighbours distinct} x_{i(1)}^{|V₁|} ⋯ x_{i(r)}^{|V_r|}`,
//!
//! related by Möbius inversion over `Int(n)`:
//! `P_σ = Σ_{π ≥ σ} (−1)^{|σ|−|π|} Q_π`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::partitions::{Composition, Partition, PartitionError};
use crate::scalar::{rational, Rational};

/// Bound on `n` for [`p_basis`].
pub const P_BASIS_MAX: usize = 20;
/// Bound on the number of letters for the letter-expansion oracles.
pub const LETTERS_MAX: usize = 6;
/// Bound on total degree for the letter-expansion oracles.
pub const EXPANSION_DEGREE_MAX: usize = 8;
/// Bound on `k` / `n` for [`stochastic_integral_poly`] and [`psi_poly`].
pub const RECURSION_MAX: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NcsymError {
    #[error("{what} = {value} exceeds the bound {max}")]
    Bound { what: &'static str, value: usize, max: usize },
    #[error("expected a polynomial over {expected:?}, got {found:?}")]
    Alphabet { expected: Alphabet, found: Alphabet },
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

fn bound(what: &'static str, value: usize, max: usize) -> Result<(), NcsymError> {
    if value > max {
        Err(NcsymError::Bound { what, value, max })
    } else {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Alphabet {
    /// `p_1, p_2, …`; generator `k` has degree `k`.
    PowerSum,
    /// `x_1, x_2, …`; every generator has degree 1.
    Letter,
    /// `y_1, y_2, …`; generator `j` has degree `j`.
    Variation,
    /// `X = X⁽¹⁾, X⁽²⁾, …`; generator `j` has degree `j`.
    Process,
}

impl Alphabet {
    fn degree(self, generator: u16) -> usize {
        match self {
            Alphabet::Letter => 1,
            _ => generator as usize,
        }
    }

    fn name(self, generator: u16) -> String {
        match self {
            Alphabet::PowerSum => format!("p{generator}"),
            Alphabet::Letter => format!("x{generator}"),
            Alphabet::Variation => format!("y{generator}"),
            Alphabet::Process if generator == 1 => "X".to_string(),
            Alphabet::Process => format!("X{generator}"),
        }
    }
}

/// A word in run-length form: adjacent equal generators are merged.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    runs: Vec<(u16, u16)>,
}

impl Word {
    pub fn unit() -> Self {
        Word::default()
    }

    pub fn from_generators(gens: &[u16]) -> Self {
        let mut w = Word::unit();
        for &g in gens {
            w.push(g, 1);
        }
        w
    }

    fn push(&mut self, generator: u16, exp: u16) {
        if exp == 0 {
            return;
        }
        match self.runs.last_mut() {
            Some((g, e)) if *g == generator => *e += exp,
            _ => self.runs.push((generator, exp)),
        }
    }

    pub fn runs(&self) -> &[(u16, u16)] {
        &self.runs
    }

    /// The generator sequence with runs expanded.
    pub fn flatten(&self) -> Vec<u16> {
        self.runs
            .iter()
            .flat_map(|&(g, e)| std::iter::repeat_n(g, e as usize))
            .collect()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut w = self.clone();
        for &(g, e) in &other.runs {
            w.push(g, e);
        }
        w
    }

    /// Number of letters, counted with multiplicity.
    pub fn len(&self) -> usize {
        self.runs.iter().map(|&(_, e)| e as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
}

/// A finite exact linear combination of words over one alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NcPolynomial {
    alphabet: Alphabet,
    terms: BTreeMap<Word, Rational>,
}

impl NcPolynomial {
    pub fn zero(alphabet: Alphabet) -> Self {
        NcPolynomial { alphabet, terms: BTreeMap::new() }
    }

    pub fn one(alphabet: Alphabet) -> Self {
        Self::monomial(alphabet, &[], rational(1))
    }

    pub fn monomial(alphabet: Alphabet, gens: &[u16], coeff: Rational) -> Self {
        let mut p = Self::zero(alphabet);
        p.add_term(Word::from_generators(gens), coeff);
        p
    }

    pub fn generator(alphabet: Alphabet, g: u16) -> Self {
        Self::monomial(alphabet, &[g], rational(1))
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Rational)> {
        self.terms.iter()
    }

    /// Coefficient of the word spelled by `gens` (zero when absent).
    pub fn coefficient(&self, gens: &[u16]) -> Rational {
        self.terms.get(&Word::from_generators(gens)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add_term(&mut self, word: Word, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        let slot = self.terms.entry(word.clone()).or_insert_with(Rational::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.terms.remove(&word);
        }
    }

    fn check_same(&self, other: &Self) {
        assert_eq!(
            self.alphabet, other.alphabet,
            "polynomials over different alphabets cannot be combined"
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_same(other);
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-rational(1)))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut out = Self::zero(self.alphabet);
        for (w, v) in &self.terms {
            out.add_term(w.clone(), v * c);
        }
        out
    }

    /// Non-commutative product: words concatenate in order.
    pub fn mul(&self, other: &Self) -> Self {
        self.check_same(other);
        let mut out = Self::zero(self.alphabet);
        for (wa, ca) in &self.terms {
            for (wb, cb) in &other.terms {
                out.add_term(wa.concat(wb), ca * cb);
            }
        }
        out
    }

    /// Same words and coefficients, read over another alphabet (e.g. `y_j ↦ p_j`).
    pub fn relabel(&self, alphabet: Alphabet) -> Self {
        NcPolynomial { alphabet, terms: self.terms.clone() }
    }

    fn word_degree(&self, w: &Word) -> usize {
        w.runs.iter().map(|&(g, e)| self.alphabet.degree(g) * e as usize).sum()
    }

    /// Largest degree among the terms (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|w| self.word_degree(w)).max().unwrap_or(0)
    }

    /// Terms in display order: degree descending, then lexicographic on the
    /// flattened generator sequence.
    pub fn sorted_terms(&self) -> Vec<(&Word, &Rational)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|(a, _), (b, _)| {
            self.word_degree(b)
                .cmp(&self.word_degree(a))
                .then_with(|| a.flatten().cmp(&b.flatten()))
        });
        v
    }

    /// Substitutes an element of an algebra for every generator.
    pub fn evaluate<A: NcAlgebra>(&self, unit: &A, mut gen: impl FnMut(u16) -> A) -> A {
        let mut cache: HashMap<u16, A> = HashMap::new();
        let mut total = unit.zero_like();
        for (w, c) in &self.terms {
            let mut prod = unit.clone();
            for g in w.flatten() {
                let v = cache.entry(g).or_insert_with(|| gen(g));
                prod = prod.mul(v);
            }
            total.add_scaled(&prod, rational_to_f64(c));
        }
        total
    }
}

fn rational_to_f64(c: &Rational) -> f64 {
    crate::scalar::Scalar::to_float(c)
}

/// The operations [`NcPolynomial::evaluate`] needs from its target algebra.
pub trait NcAlgebra: Clone {
    fn zero_like(&self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn add_scaled(&mut self, rhs: &Self, c: f64);
}

impl NcAlgebra for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn add_scaled(&mut self, rhs: &Self, c: f64) {
        *self += c * rhs;
    }
}

impl fmt::Display for NcPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (w, c)) in self.sorted_terms().into_iter().enumerate() {
            let negative = c.is_negative();
            match (i, negative) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mag = c.abs();
            let body: Vec<String> = w.flatten().into_iter().map(|g| self.alphabet.name(g)).collect();
            if body.is_empty() {
                write!(f, "{mag}")?;
            } else {
                if !mag.is_one() {
                    write!(f, "{mag}*")?;
                }
                write!(f, "{}", body.join("*"))?;
            }
        }
        Ok(())
    }
}

fn require_interval(sigma: &Partition) -> Result<Composition, NcsymError> {
    Ok(Composition::from_interval(sigma)?)
}

/// `Q_σ`: the ordered word of block sizes.
pub fn q_basis(sigma: &Partition) -> Result<NcPolynomial, NcsymError> {
    let comp = require_interval(sigma)?;
    let gens: Vec<u16> = comp.parts().iter().map(|&p| p as u16).collect();
    Ok(NcPolynomial::monomial(Alphabet::PowerSum, &gens, rational(1)))
}

/// `P_σ = Σ_{π ∈ Int(n), π ≥ σ} (−1)^{|σ|−|π|} Q_π`.
///
/// Coarsenings of `σ` are exactly the subsets of its internal cuts that are kept.
pub fn p_basis(sigma: &Partition) -> Result<NcPolynomial, NcsymError> {
    let comp = require_interval(sigma)?;
    bound("n", comp.degree(), P_BASIS_MAX)?;
    let parts = comp.parts();
    let cuts = parts.len() - 1;
    let mut out = NcPolynomial::zero(Alphabet::PowerSum);
    for keep in 0u32..(1 << cuts) {
        let mut gens = Vec::with_capacity(parts.len());
        let mut acc = parts[0];
        for (c, &part) in parts.iter().enumerate().skip(1) {
            if keep >> (c - 1) & 1 == 1 {
                gens.push(acc as u16);
                acc = part;
            } else {
                acc += part;
            }
        }
        gens.push(acc as u16);
        let merged = parts.len() - gens.len();
        let sign = if merged % 2 == 0 { 1 } else { -1 };
        out.add_term(Word::from_generators(&gens), rational(sign));
    }
    Ok(out)
}

/// Expands every `p_k` as `Σ_{i=1}^{N} x_iᵏ`.
pub fn expand_letters(poly: &NcPolynomial, letters: usize) -> Result<NcPolynomial, NcsymError> {
    if poly.alphabet() != Alphabet::PowerSum {
        return Err(NcsymError::Alphabet { expected: Alphabet::PowerSum, found: poly.alphabet() });
    }
    bound("N", letters, LETTERS_MAX)?;
    bound("degree", poly.degree(), EXPANSION_DEGREE_MAX)?;
    let mut out = NcPolynomial::zero(Alphabet::Letter);
    for (w, c) in poly.terms() {
        let gens = w.flatten();
        for_each_index_tuple(gens.len(), letters, false, |idx| {
            let mut word = Word::unit();
            for (&k, &i) in gens.iter().zip(idx) {
                word.push(i as u16 + 1, k);
            }
            out.add_term(word, c.clone());
        });
    }
    Ok(out)
}

/// `Σ_{i(1),…,i(r) ∈ [N], i(j) ≠ i(j+1)} x_{i(1)}^{u(1)} ⋯ x_{i(r)}^{u(r)}`, by enumeration.
pub fn distinct_neighbor_bruteforce(
    u: &Composition,
    letters: usize,
) -> Result<NcPolynomial, NcsymError> {
    bound("N", letters, LETTERS_MAX)?;
    bound("degree", u.degree(), EXPANSION_DEGREE_MAX)?;
    let mut out = NcPolynomial::zero(Alphabet::Letter);
    for_each_index_tuple(u.parts().len(), letters, true, |idx| {
        let mut word = Word::unit();
        for (&k, &i) in u.parts().iter().zip(idx) {
            word.push(i as u16 + 1, k as u16);
        }
        out.add_term(word, rational(1));
    });
    Ok(out)
}

fn for_each_index_tuple(
    len: usize,
    letters: usize,
    distinct_neighbors: bool,
    mut f: impl FnMut(&[usize]),
) {
    let mut idx = vec![0usize; len];
    fn rec(
        pos: usize,
        idx: &mut Vec<usize>,
        letters: usize,
        distinct: bool,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if pos == idx.len() {
            f(idx);
            return;
        }
        for i in 0..letters {
            if distinct && pos > 0 && idx[pos - 1] == i {
                continue;
            }
            idx[pos] = i;
            rec(pos + 1, idx, letters, distinct, f);
        }
    }
    rec(0, &mut idx, letters, distinct_neighbors, &mut f);
}

/// All compositions of `k`, in lexicographic order of their parts.
fn compositions(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 1..=k {
        for mut rest in compositions(k - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `Σ_{j=1}^{k} (−1)^{k−j} Σ_{m₁+…+m_j = k} y_{m₁} ⋯ y_{m_j}`.
pub fn stochastic_integral_poly(k: usize) -> Result<NcPolynomial, NcsymError> {
    if k == 0 {
        return Err(NcsymError::Bound { what: "k", value: 0, max: RECURSION_MAX });
    }
    bound("k", k, RECURSION_MAX)?;
    let mut out = NcPolynomial::zero(Alphabet::Variation);
    for comp in compositions(k) {
        let sign = if (k - comp.len()).is_multiple_of(2) { 1 } else { -1 };
        let gens: Vec<u16> = comp.iter().map(|&m| m as u16).collect();
        out.add_term(Word::from_generators(&gens), rational(sign));
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> i64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

/// `ψₙ = X ψ_{n−1} + Σ_{j=2}^{n} (−1)^{j−1} Σ_{k=0}^{n−j} C(k+j−2, j−2) X⁽ʲ⁾ ψ_{n−j−k}`
/// with `ψ₀ = 1`; `X⁽ʲ⁾` multiplies from the left.
pub fn psi_poly(n: usize) -> Result<NcPolynomial, NcsymError> {
    bound("n", n, RECURSION_MAX)?;
    let x = |j: usize| NcPolynomial::generator(Alphabet::Process, j as u16);
    let mut psi: Vec<NcPolynomial> = vec![NcPolynomial::one(Alphabet::Process)];
    for m in 1..=n {
        let mut next = x(1).mul(&psi[m - 1]);
        for j in 2..=m {
            let sign = if (j - 1) % 2 == 0 { 1 } else { -1 };
            for k in 0..=m - j {
                let w = rational(sign * binomial(k + j - 2, j - 2));
                next = next.add(&x(j).mul(&psi[m - j - k]).scale(&w));
            }
        }
        psi.push(next);
    }
    Ok(psi.swap_remove(n))
}
