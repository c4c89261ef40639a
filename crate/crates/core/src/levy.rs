//! Lévy calculus for ⊞-infinitely divisible laws.
//!
//! A law is described either by a generating triple `(η, a, ρ)`,
//!
//! `φ(z) = η + a/z + ∫ [z²/(z − x) − z − x·1_{[−1,1]}(x)] dρ(x)`,
//!
//! or by a generating pair `(γ, σ)`, `φ(z) = γ + ∫ (1 + xz)/(z − x) dσ(x)`.
//! Everything here is generic over [`Scalar`]: atomic parts stay exact with
//! rationals, grid densities are integrated in floating point.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cumulants::CumulantSequence;
use crate::measure::{DensityGrid, Measure, MeasureError};
use crate::scalar::{powi, Scalar};
use crate::transforms::{self, InversionOptions, Inverted, TransformError};

/// Longest cumulant sequence produced by [`triple_to_cumulants`].
pub const CUMULANT_MAX: usize = 12;
/// Target cells for binned density pushforwards (a floor for the exact route).
pub const PUSHFORWARD_CELLS: usize = 4096;
/// Split point of the compensator integral in [`variation_triple`].
pub const COMPENSATOR_SPLIT: f64 = 1e-3;
/// Images this close to 0 are dropped by [`pushforward_levy`].
pub const ORIGIN_TOL: f64 = 1e-12;
/// Upper guard on `∫ min(1, x²) dρ`.
pub const INTEGRABILITY_GUARD: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevyError {
    #[error("Lévy measure has an atom at the origin")]
    OriginAtom,
    #[error("Lévy measure fails the integrability check: ∫ min(1, x²) dρ = {0}")]
    NotIntegrable(f64),
    #[error("{0} is not finite")]
    Divergent(&'static str),
    #[error("invalid variation map: {0}")]
    BadMap(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// A Lévy measure: no mass at 0, `∫ min(1, x²) dρ < ∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: DeserializeOwned"))]
pub struct LevyMeasure<S = f64>(Measure<S>);

impl<S: Scalar> LevyMeasure<S> {
    pub fn new(measure: Measure<S>) -> Result<Self, LevyError> {
        measure.validate()?;
        if measure.atoms.iter().any(|(x, m)| x.is_zero() && !m.is_zero()) {
            return Err(LevyError::OriginAtom);
        }
        let rho = LevyMeasure(measure);
        let guard = rho.integrate(min_one_sq, |x| (x * x).min(1.0), &[-1.0, 1.0]).to_float();
        if !(guard.is_finite() && guard <= INTEGRABILITY_GUARD) {
            return Err(LevyError::NotIntegrable(guard));
        }
        Ok(rho)
    }

    pub fn zero() -> Self {
        LevyMeasure(Measure::zero())
    }

    /// Atoms `(x, mass)`; locations must be non-zero.
    pub fn atomic(atoms: Vec<(S, S)>) -> Result<Self, LevyError> {
        Self::new(Measure::atomic(atoms))
    }

    pub fn measure(&self) -> &Measure<S> {
        &self.0
    }

    pub fn into_measure(self) -> Measure<S> {
        self.0
    }

    /// `∫ f dρ` with `f_exact` on the atoms and `f` on the density.
    pub fn integrate(&self, f_exact: impl Fn(&S) -> S, f: impl Fn(f64) -> f64, breaks: &[f64]) -> S {
        integrate(&self.0, f_exact, f, breaks)
    }

    /// `∫ xᵏ dρ`.
    pub fn moment(&self, k: u32) -> S {
        self.integrate(|x| powi(x, k), |x| x.powi(k as i32), &[])
    }

    /// Largest `|x|` in the support (0 for the zero measure).
    pub fn radius(&self) -> f64 {
        self.0.support().map_or(0.0, |(lo, hi)| lo.abs().max(hi.abs()))
    }
}

fn min_one_sq<S: Scalar>(x: &S) -> S {
    let sq = x.clone() * x.clone();
    if sq > S::one() {
        S::one()
    } else {
        sq
    }
}

fn integrate<S: Scalar>(
    m: &Measure<S>,
    f_exact: impl Fn(&S) -> S,
    f: impl Fn(f64) -> f64,
    breaks: &[f64],
) -> S {
    let density = m.integrate_density(f, breaks);
    m.integrate_atoms(f_exact) + S::from_float(density)
}

fn in_unit<S: Scalar>(x: &S) -> bool {
    x.abs() <= S::one()
}

/// `(η, a, ρ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: DeserializeOwned"))]
pub struct GeneratingTriple<S = f64> {
    pub eta: S,
    pub a: S,
    pub rho: LevyMeasure<S>,
}

/// `(γ, σ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: DeserializeOwned"))]
pub struct GeneratingPair<S = f64> {
    pub gamma: S,
    pub sigma: Measure<S>,
}

impl<S: Scalar> GeneratingTriple<S> {
    pub fn new(eta: S, a: S, rho: LevyMeasure<S>) -> Result<Self, LevyError> {
        if a < S::zero() {
            return Err(LevyError::Invalid("semicircular coefficient a must be non-negative".into()));
        }
        Ok(GeneratingTriple { eta, a, rho })
    }
}

impl GeneratingTriple<f64> {
    pub fn from_json(text: &str) -> Result<Self, LevyError> {
        let t: GeneratingTriple<f64> =
            serde_json::from_str(text).map_err(|e| LevyError::Invalid(e.to_string()))?;
        Self::new(t.eta, t.a, LevyMeasure::new(t.rho.0)?)
    }
}

impl GeneratingPair<f64> {
    pub fn from_json(text: &str) -> Result<Self, LevyError> {
        let p: GeneratingPair<f64> =
            serde_json::from_str(text).map_err(|e| LevyError::Invalid(e.to_string()))?;
        p.sigma.validate()?;
        Ok(p)
    }
}

/// Multiplies every density node by `w(x)`, zeroing a node sitting on the origin.
fn reweight_density(grid: &DensityGrid, w: impl Fn(f64) -> f64) -> DensityGrid {
    let mut g = grid.clone();
    for j in 0..g.values.len() {
        let x = g.node(j);
        g.values[j] = if x == 0.0 { 0.0 } else { g.values[j] * w(x) };
    }
    g
}

/// `σ = aδ₀ + x²/(1+x²) ρ`, `γ = η − ∫ x[1_{[−1,1]} − 1/(1+x²)] dρ`.
pub fn triple_to_pair<S: Scalar>(t: &GeneratingTriple<S>) -> Result<GeneratingPair<S>, LevyError> {
    let rho = t.rho.measure();
    let mut atoms: Vec<(S, S)> = rho
        .atoms
        .iter()
        .map(|(x, m)| {
            let sq = x.clone() * x.clone();
            (x.clone(), m.clone() * sq.clone() / (S::one() + sq))
        })
        .collect();
    if !t.a.is_zero() {
        atoms.push((S::zero(), t.a.clone()));
    }
    let mut sigma = Measure::atomic(atoms);
    if let Some(g) = &rho.density {
        sigma = sigma.with_density(reweight_density(g, |x| x * x / (1.0 + x * x)));
    }
    let atom_shift = rho.integrate_atoms(|x| {
        let r = S::one() / (S::one() + x.clone() * x.clone());
        let ind = if in_unit(x) { S::one() } else { S::zero() };
        x.clone() * (ind - r)
    });
    // The density part is integrated against σ with the kernel pair_to_triple
    // uses, so grid roundtrips only pick up float rounding in η.
    let density_shift = sigma.integrate_density(sigma_kernel, &[-1.0, 1.0]);
    let shift = atom_shift + S::from_float(density_shift);
    if !shift.is_finite_value() {
        return Err(LevyError::Divergent("drift correction ∫ x[1_{[-1,1]} - 1/(1+x²)] dρ"));
    }
    Ok(GeneratingPair { gamma: t.eta.clone() - shift, sigma })
}

/// `(1+x²)/x · [1_{[−1,1]} − 1/(1+x²)]`: `x` inside `[−1,1]`, `−1/x` outside.
fn sigma_kernel(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        x
    } else {
        -1.0 / x
    }
}

/// `a = σ({0})`, `ρ = (1+x²)/x² σ` off 0,
/// `η = γ + ∫_{x≠0} (1+x²)/x [1_{[−1,1]} − 1/(1+x²)] dσ`.
pub fn pair_to_triple<S: Scalar>(p: &GeneratingPair<S>) -> Result<GeneratingTriple<S>, LevyError> {
    p.sigma.validate()?;
    let sigma = &p.sigma;
    let a = sigma
        .atoms
        .iter()
        .filter(|(x, _)| x.is_zero())
        .fold(S::zero(), |acc, (_, m)| acc + m.clone());
    let kernel = |x: &S| if in_unit(x) { x.clone() } else { -(S::one() / x.clone()) };
    let shift = integrate(
        &Measure { atoms: sigma.atoms.iter().filter(|(x, _)| !x.is_zero()).cloned().collect(), density: sigma.density.clone() },
        kernel,
        sigma_kernel,
        &[-1.0, 1.0],
    );
    if !shift.is_finite_value() {
        return Err(LevyError::Divergent("drift correction ∫ (1+x²)/x [...] dσ"));
    }
    let atoms = sigma
        .atoms
        .iter()
        .filter(|(x, _)| !x.is_zero())
        .map(|(x, m)| {
            let sq = x.clone() * x.clone();
            (x.clone(), m.clone() * (S::one() + sq.clone()) / sq)
        })
        .collect();
    let mut rho = Measure::atomic(atoms);
    if let Some(g) = &sigma.density {
        rho = rho.with_density(reweight_density(g, |x| (1.0 + x * x) / (x * x)));
    }
    GeneratingTriple::new(p.gamma.clone() + shift, a, LevyMeasure::new(rho)?)
}

/// The function `p` of a [`VariationMap`].
#[derive(Clone)]
pub enum VariationFn<S> {
    /// `p(x) = xᵏ`.
    Power(u32),
    /// `p(x) = Σ cᵢ xⁱ`, coefficients from `c₀`.
    Polynomial(Vec<S>),
    /// Any continuous `p`, evaluated in floating point.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl<S: fmt::Debug> fmt::Debug for VariationFn<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariationFn::Power(k) => write!(f, "Power({k})"),
            VariationFn::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            VariationFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A map `p` with `p(0) = 0`, together with `b = p′(0)` and `c = p″(0)/2`.
///
/// `b` and `c` are never obtained by numerical differentiation: they come
/// from the coefficients of power and polynomial maps, or from the caller.
#[derive(Clone, Debug)]
pub struct VariationMap<S = f64> {
    p: VariationFn<S>,
    b: S,
    c: S,
    pieces: Option<Vec<(f64, f64)>>,
}

impl<S: Scalar> VariationMap<S> {
    /// `p(x) = xᵏ`, `k ≥ 1`, with its monotone pieces.
    pub fn power(k: u32) -> Result<Self, LevyError> {
        if k == 0 {
            return Err(LevyError::BadMap("x^0 does not vanish at 0".into()));
        }
        let pieces = if k % 2 == 1 {
            vec![(f64::NEG_INFINITY, f64::INFINITY)]
        } else {
            vec![(f64::NEG_INFINITY, 0.0), (0.0, f64::INFINITY)]
        };
        Ok(VariationMap {
            p: VariationFn::Power(k),
            b: if k == 1 { S::one() } else { S::zero() },
            c: if k == 2 { S::one() } else { S::zero() },
            pieces: Some(pieces),
        })
    }

    /// `p(x) = Σ cᵢ xⁱ` with `c₀ = 0`.
    pub fn polynomial(coeffs: Vec<S>) -> Result<Self, LevyError> {
        if coeffs.first().is_some_and(|c0| c0.to_float().abs() > 1e-12) {
            return Err(LevyError::BadMap("p(0) must vanish".into()));
        }
        let b = coeffs.get(1).cloned().unwrap_or_else(S::zero);
        let c = coeffs.get(2).cloned().unwrap_or_else(S::zero);
        Ok(VariationMap { p: VariationFn::Polynomial(coeffs), b, c, pieces: None })
    }

    /// A custom `p` with caller-supplied `b = p′(0)` and `c = p″(0)/2`.
    pub fn custom(
        p: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        b: S,
        c: S,
        monotone_pieces: Option<Vec<(f64, f64)>>,
    ) -> Result<Self, LevyError> {
        if p(0.0).abs() > 1e-12 {
            return Err(LevyError::BadMap(format!("|p(0)| = {} exceeds 1e-12", p(0.0).abs())));
        }
        Ok(VariationMap { p: VariationFn::Custom(p), b, c, pieces: monotone_pieces })
    }

    /// Declares the intervals on which `p` is injective.
    pub fn with_pieces(mut self, pieces: Vec<(f64, f64)>) -> Self {
        self.pieces = Some(pieces);
        self
    }

    pub fn b(&self) -> &S {
        &self.b
    }

    pub fn c(&self) -> &S {
        &self.c
    }

    pub fn monotone_pieces(&self) -> Option<&[(f64, f64)]> {
        self.pieces.as_deref()
    }

    pub fn function(&self) -> &VariationFn<S> {
        &self.p
    }

    pub fn eval(&self, x: &S) -> S {
        match &self.p {
            VariationFn::Power(k) => powi(x, *k),
            VariationFn::Polynomial(c) => {
                c.iter().rev().fold(S::zero(), |acc, ci| acc * x.clone() + ci.clone())
            }
            VariationFn::Custom(f) => S::from_float(f(x.to_float())),
        }
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        match &self.p {
            VariationFn::Power(k) => x.powi(*k as i32),
            VariationFn::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ci| acc * x + ci.to_float()),
            VariationFn::Custom(f) => f(x),
        }
    }

    /// `p′(x)`: exact for power and polynomial maps, a central difference otherwise.
    pub fn derivative_f64(&self, x: f64) -> f64 {
        match &self.p {
            VariationFn::Power(k) => *k as f64 * x.powi(*k as i32 - 1),
            VariationFn::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, ci)| acc * x + i as f64 * ci.to_float()),
            VariationFn::Custom(f) => {
                let h = 1e-6 * x.abs().max(1e-3);
                (f(x + h) - f(x - h)) / (2.0 * h)
            }
        }
    }

    /// `q(x) = (p(x) − b x)/x²`, with the removable singularity at 0 filled by `c`.
    pub fn q_f64(&self, x: f64) -> f64 {
        match &self.p {
            VariationFn::Power(k) => match k {
                1 => 0.0,
                _ => x.powi(*k as i32 - 2),
            },
            VariationFn::Polynomial(c) => {
                c.iter().skip(2).rev().fold(0.0, |acc, ci| acc * x + ci.to_float())
            }
            VariationFn::Custom(f) => {
                if x == 0.0 {
                    self.c.to_float()
                } else {
                    (f(x) - self.b.to_float() * x) / (x * x)
                }
            }
        }
    }
}

/// Finds `x ∈ [a, b]` with `p(x) = y`, `p` monotone on the interval.
fn invert_monotone(p: &impl Fn(f64) -> f64, a: f64, b: f64, y: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let increasing = p(b) >= p(a);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (p(mid) < y) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn push_density_pieces<S: Scalar>(
    grid: &DensityGrid,
    vm: &VariationMap<S>,
    pieces: &[(f64, f64)],
) -> Option<DensityGrid> {
    let p = |x: f64| vm.eval_f64(x);
    let spans: Vec<(f64, f64, f64, f64)> = pieces
        .iter()
        .filter_map(|&(a, b)| {
            let (a, b) = (a.max(grid.lo), b.min(grid.hi));
            (a < b).then(|| {
                let (pa, pb) = (p(a), p(b));
                (a, b, pa.min(pb), pa.max(pb))
            })
        })
        .collect();
    let ylo = spans.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    let yhi = spans.iter().map(|s| s.3).fold(f64::NEG_INFINITY, f64::max);
    if !(ylo < yhi) {
        return None;
    }
    // Interpolation error is O(h²), so the target keeps pace with the source resolution.
    let cells = (16 * grid.cells()).max(PUSHFORWARD_CELLS);
    let h = (yhi - ylo) / cells as f64;
    let values = (0..=cells)
        .map(|j| {
            let y = if j == cells { yhi } else { ylo + j as f64 * h };
            if y.abs() <= ORIGIN_TOL {
                return 0.0;
            }
            spans
                .iter()
                .filter(|s| y >= s.2 && y <= s.3)
                .map(|&(a, b, _, _)| {
                    let x = invert_monotone(&p, a, b, y);
                    let jac = vm.derivative_f64(x).abs();
                    if jac > 0.0 {
                        grid.interp(x) / jac
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
        })
        .collect();
    Some(DensityGrid { lo: ylo, hi: yhi, h, values })
}

/// Mass-preserving binning of the pushed density onto a uniform target grid.
fn push_density_binned<S: Scalar>(grid: &DensityGrid, vm: &VariationMap<S>) -> Option<DensityGrid> {
    const SUB: usize = 16;
    let mut pieces = Vec::with_capacity(grid.cells() * SUB);
    for j in 0..grid.cells() {
        let (x0, x1) = (grid.node(j), grid.node(j + 1));
        let w = (x1 - x0) / SUB as f64;
        for s in 0..SUB {
            let (a, b) = (x0 + s as f64 * w, x0 + (s + 1) as f64 * w);
            let mass = 0.5 * (grid.interp(a) + grid.interp(b)) * w;
            let y = vm.eval_f64(0.5 * (a + b));
            if mass > 0.0 && y.abs() > ORIGIN_TOL {
                pieces.push((y, mass));
            }
        }
    }
    let ylo = pieces.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let yhi = pieces.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !(ylo <= yhi) {
        return None;
    }
    let inner = PUSHFORWARD_CELLS - 2;
    let h = ((yhi - ylo) / inner as f64).max(1e-12);
    // One empty cell on each side keeps the trapezoid mass equal to the binned mass.
    let lo = ylo - h;
    let mut cell_mass = vec![0.0; PUSHFORWARD_CELLS];
    for (y, m) in pieces {
        let k = (((y - ylo) / h).floor() as usize).min(inner - 1) + 1;
        cell_mass[k] += m;
    }
    let dens: Vec<f64> = cell_mass.iter().map(|m| m / h).collect();
    let values = (0..=PUSHFORWARD_CELLS)
        .map(|j| {
            let left = if j > 0 { dens[j - 1] } else { 0.0 };
            let right = if j < PUSHFORWARD_CELLS { dens[j] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    Some(DensityGrid { lo, hi: lo + PUSHFORWARD_CELLS as f64 * h, h, values })
}

/// `ρᵖ`, defined by `∫ f dρᵖ = ∫ f(p(x)) 1_{p(x)≠0} dρ(x)`.
///
/// Atoms move to `p(xᵢ)`; images at (or within 1e−12 of) 0 are dropped and
/// colliding images merge. Densities are pushed by change of variables on the
/// declared monotone pieces of `p`, or binned onto 4096 cells otherwise.
pub fn pushforward_levy<S: Scalar>(
    rho: &LevyMeasure<S>,
    vm: &VariationMap<S>,
) -> Result<LevyMeasure<S>, LevyError> {
    let atoms = rho
        .measure()
        .atoms
        .iter()
        .map(|(x, m)| (vm.eval(x), m.clone()))
        .filter(|(y, _)| !y.is_zero() && y.to_float().abs() > ORIGIN_TOL)
        .collect();
    let mut out = Measure::atomic(atoms);
    if let Some(grid) = &rho.measure().density {
        let pushed = match vm.monotone_pieces() {
            Some(pieces) => push_density_pieces(grid, vm, pieces),
            None => push_density_binned(grid, vm),
        };
        if let Some(g) = pushed {
            out = out.with_density(g);
        }
    }
    LevyMeasure::new(out)
}

/// The generating triple of the variation process `X⁽ᵖ⁾`:
/// `ηᵖ = bη + ac + ∫ [1_{0<|p(x)|≤1} p(x) − 1_{0<|x|≤1} b x] dρ(x)`,
/// `aᵖ = a b²`, `ρᵖ` the pushforward of `ρ` under `p`.
pub fn variation_triple<S: Scalar>(
    t: &GeneratingTriple<S>,
    vm: &VariationMap<S>,
) -> Result<GeneratingTriple<S>, LevyError> {
    let b = vm.b().clone();
    let bf = b.to_float();
    let exact = |x: &S| {
        let px = vm.eval(x);
        let keep = !px.is_zero() && in_unit(&px);
        let first = if keep { px } else { S::zero() };
        let second = if !x.is_zero() && in_unit(x) { b.clone() * x.clone() } else { S::zero() };
        first - second
    };
    let float = |x: f64| {
        if x == 0.0 {
            return 0.0;
        }
        if x.abs() < COMPENSATOR_SPLIT {
            // Both indicators are on near 0 (wherever p(x) ≠ 0), leaving the
            // removable q(x)·x².
            let px = vm.eval_f64(x);
            return if px != 0.0 && px.abs() <= 1.0 { vm.q_f64(x) * x * x } else { -bf * x };
        }
        let px = vm.eval_f64(x);
        let first = if px != 0.0 && px.abs() <= 1.0 { px } else { 0.0 };
        let second = if x.abs() <= 1.0 { bf * x } else { 0.0 };
        first - second
    };
    let mut breaks = vec![-1.0, -COMPENSATOR_SPLIT, COMPENSATOR_SPLIT, 1.0];
    if let Some(g) = &t.rho.measure().density {
        breaks.extend(level_crossings(g, vm));
    }
    let compensator = t.rho.integrate(exact, float, &breaks);
    if !compensator.is_finite_value() {
        return Err(LevyError::Divergent("compensator integral"));
    }
    let eta = b.clone() * t.eta.clone() + t.a.clone() * vm.c().clone() + compensator;
    let a = t.a.clone() * b.clone() * b;
    GeneratingTriple::new(eta, a, pushforward_levy(&t.rho, vm)?)
}

/// Points of the grid range where `|p(x)| = 1`, located by sign changes on a fine scan.
fn level_crossings<S: Scalar>(g: &DensityGrid, vm: &VariationMap<S>) -> Vec<f64> {
    let scan = 8 * g.cells().max(1);
    let step = (g.hi - g.lo) / scan as f64;
    let f = |x: f64| vm.eval_f64(x).abs() - 1.0;
    let mut out = Vec::new();
    let mut prev = (g.lo, f(g.lo));
    for i in 1..=scan {
        let x = g.lo + i as f64 * step;
        let v = f(x);
        if prev.1.signum() != v.signum() {
            let (mut a, mut b) = (prev.0, x);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if f(m).signum() == f(a).signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev = (x, v);
    }
    out
}

/// Free cumulants `κ₁ = η + ∫_{|x|>1} x dρ`, `κ₂ = a + ∫ x² dρ`,
/// `κₘ = ∫ xᵐ dρ` for `m ≥ 3`, read off the series `φ(z) = Σ κₘ z^{1−m}`.
pub fn triple_to_cumulants<S: Scalar>(
    t: &GeneratingTriple<S>,
    n: usize,
) -> Result<CumulantSequence<S>, LevyError> {
    if n == 0 || n > CUMULANT_MAX {
        return Err(LevyError::Invalid(format!("n = {n} must lie in 1..={CUMULANT_MAX}")));
    }
    let mut out = Vec::with_capacity(n);
    for m in 1..=n {
        let k = match m {
            1 => {
                t.eta.clone()
                    + t.rho.integrate(
                        |x| if in_unit(x) { S::zero() } else { x.clone() },
                        |x| if x.abs() <= 1.0 { 0.0 } else { x },
                        &[-1.0, 1.0],
                    )
            }
            2 => t.a.clone() + t.rho.moment(2),
            _ => t.rho.moment(m as u32),
        };
        if !k.is_finite_value() {
            return Err(LevyError::Divergent("cumulant integral"));
        }
        out.push(k);
    }
    Ok(CumulantSequence::new(out))
}

/// `φ(z)` from the triple, straight from its integral representation.
pub fn phi_of_triple(t: &GeneratingTriple<f64>, z: Complex64) -> Complex64 {
    let rho = t.rho.measure();
    let kernel = |x: f64| z * z / (z - x) - z - if x.abs() <= 1.0 { x } else { 0.0 };
    let mut acc = t.eta + t.a / z;
    for &(x, m) in &rho.atoms {
        acc += m * kernel(x);
    }
    let re = rho.integrate_density(|x| kernel(x).re, &[-1.0, 1.0]);
    let im = rho.integrate_density(|x| kernel(x).im, &[-1.0, 1.0]);
    acc + Complex64::new(re, im)
}

/// `(φ(u), φ′(u))` from the pair: `φ(u) = γ + ∫ (1 + xu)/(u − x) dσ(x)`.
pub fn phi_of_pair(p: &GeneratingPair<f64>, u: Complex64) -> (Complex64, Complex64) {
    let mut phi = Complex64::new(p.gamma, 0.0);
    let mut dphi = Complex64::new(0.0, 0.0);
    for &(x, m) in &p.sigma.atoms {
        let d = u - x;
        phi += m * (1.0 + x * u) / d;
        dphi -= m * (1.0 + x * x) / (d * d);
    }
    let part = |f: &dyn Fn(f64) -> Complex64| {
        Complex64::new(
            p.sigma.integrate_density(|x| f(x).re, &[]),
            p.sigma.integrate_density(|x| f(x).im, &[]),
        )
    };
    phi += part(&|x| (1.0 + x * u) / (u - x));
    dphi -= part(&|x| (1.0 + x * x) / ((u - x) * (u - x)));
    (phi, dphi)
}

/// `μ^{⊞t}` for the law with generating pair `p`, any `t > 0`, via
/// `φ_{μ_t} = t φ_μ`, which the pair gives on the whole upper half-plane.
pub fn boxplus_power_of_pair(
    p: &GeneratingPair<f64>,
    t: f64,
    opts: &InversionOptions,
) -> Result<Inverted, LevyError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(LevyError::Invalid(format!("power t = {t} must be positive")));
    }
    let triple = pair_to_triple(p)?;
    let k = triple_to_cumulants(&triple, 2)?;
    let (k1, k2) = (k.values()[0], k.values()[1]);
    let reach = triple.rho.radius();
    let half = 1.2 * (2.0 * (t * k2).max(0.0).sqrt() + 2.0 * reach) + 0.1;
    let phi = |u: Complex64| {
        let (f, df) = phi_of_pair(p, u);
        (t * f, t * df)
    };
    Ok(transforms::law_from_voiculescu(&phi, t * k1 - half, t * k1 + half, opts)?)
}

/// `ρ = λ·jump` off 0, `a = 0`, `η = λ ∫_{[−1,1]} x d(jump)`.
pub fn compound_poisson_triple<S: Scalar>(
    lambda: &S,
    jump: &Measure<S>,
) -> Result<GeneratingTriple<S>, LevyError> {
    jump.validate()?;
    if !(*lambda > S::zero()) {
        return Err(LevyError::Invalid("jump rate must be positive".into()));
    }
    let mass = jump.total_mass();
    let ok = if S::EXACT { mass == S::one() } else { (mass.to_float() - 1.0).abs() <= 1e-9 };
    if !ok {
        return Err(LevyError::Invalid(format!(
            "jump law must be a probability measure (mass {})",
            mass.to_float()
        )));
    }
    let off_origin = Measure {
        atoms: jump.atoms.iter().filter(|(x, _)| !x.is_zero()).cloned().collect(),
        density: jump.density.clone(),
    };
    let eta = lambda.clone()
        * integrate(
            &off_origin,
            |x| if in_unit(x) { x.clone() } else { S::zero() },
            |x| if x.abs() <= 1.0 { x } else { 0.0 },
            &[-1.0, 1.0],
        );
    let rho = LevyMeasure::new(off_origin.scale(lambda))?;
    GeneratingTriple::new(eta, S::zero(), rho)
}

/// Settings for [`bp_limit_check`].
#[derive(Clone, Debug)]
pub struct BpOptions {
    /// Width of the common σ bins, centred on multiples of the width.
    pub bin_width: f64,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions { bin_width: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BpRow {
    pub n: usize,
    /// `γ_N = N ∫ x/(1+x²) dμ_N`.
    pub gamma: f64,
    /// Total mass of `σ_N = N x²/(1+x²) μ_N`.
    pub sigma_mass: f64,
    /// `|γ_N − γ|` against the extrapolated limit.
    pub gamma_residual: f64,
    /// Total variation between binned `σ_N` and the extrapolated `σ`.
    pub sigma_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BpReport {
    pub rows: Vec<BpRow>,
    pub gamma: f64,
    /// Extrapolated `σ`, one atom per bin centre.
    pub sigma: Measure<f64>,
}

impl BpReport {
    /// `N,gamma,sigma_mass,gamma_residual,sigma_residual` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,gamma,sigma_mass,gamma_residual,sigma_residual\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.n, r.gamma, r.sigma_mass, r.gamma_residual, r.sigma_residual
            ));
        }
        s
    }

    /// The generating pair `(γ, σ)` of the limit law.
    pub fn pair(&self) -> GeneratingPair<f64> {
        GeneratingPair { gamma: self.gamma, sigma: self.sigma.clone() }
    }
}

fn binned_sigma(mu: &Measure<f64>, n: f64, h: f64) -> BTreeMap<i64, f64> {
    let w = |x: f64| n * x * x / (1.0 + x * x);
    let mut bins = BTreeMap::new();
    for &(x, m) in &mu.atoms {
        *bins.entry((x / h).round() as i64).or_insert(0.0) += m * w(x);
    }
    if let Some(g) = &mu.density {
        let first = (g.lo / h).round() as i64;
        let last = (g.hi / h).round() as i64;
        for k in first..=last {
            let (a, b) = ((k as f64 - 0.5) * h, (k as f64 + 0.5) * h);
            let mass = g.integrate(|x| if x >= a && x < b { w(x) } else { 0.0 }, &[a, b]);
            if mass != 0.0 {
                *bins.entry(k).or_insert(0.0) += mass;
            }
        }
    }
    bins
}

/// Richardson extrapolation in `1/N` from the two largest `N`.
fn extrapolate(n1: f64, v1: f64, n2: f64, v2: f64) -> f64 {
    if (v2 - v1).abs() <= 1e-14 * v2.abs().max(1.0) {
        v2
    } else {
        (n2 * v2 - n1 * v1) / (n2 - n1)
    }
}

/// Bercovici-Pata check for a triangular family `μ_N`, `N` iid copies per row.
pub fn bp_limit_check(
    family: &dyn Fn(usize) -> Measure<f64>,
    ns: &[usize],
    opts: &BpOptions,
) -> Result<BpReport, LevyError> {
    if ns.is_empty() {
        return Err(LevyError::Invalid("need at least one N".into()));
    }
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let h = opts.bin_width;
    let mut raw = Vec::with_capacity(ns.len());
    for &n in &ns {
        let mu = family(n);
        mu.validate()?;
        let nf = n as f64;
        let gamma = nf
            * (mu.integrate_atoms(|x| x / (1.0 + x * x))
                + mu.integrate_density(|x| x / (1.0 + x * x), &[]));
        raw.push((nf, gamma, binned_sigma(&mu, nf, h)));
    }
    let (gamma, bins) = if raw.len() == 1 {
        (raw[0].1, raw[0].2.clone())
    } else {
        let (n1, g1, s1) = &raw[raw.len() - 2];
        let (n2, g2, s2) = &raw[raw.len() - 1];
        let mut keys: Vec<i64> = s1.keys().chain(s2.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        let bins: BTreeMap<i64, f64> = keys
            .into_iter()
            .map(|k| {
                let v1 = s1.get(&k).copied().unwrap_or(0.0);
                let v2 = s2.get(&k).copied().unwrap_or(0.0);
                (k, extrapolate(*n1, v1, *n2, v2).max(0.0))
            })
            .filter(|(_, v)| *v > 1e-12)
            .collect();
        (extrapolate(*n1, *g1, *n2, *g2), bins)
    };
    let rows = raw
        .iter()
        .map(|(nf, g, s)| {
            let mut keys: Vec<&i64> = s.keys().chain(bins.keys()).collect();
            keys.sort_unstable();
            keys.dedup();
            let tv = keys
                .into_iter()
                .map(|k| (s.get(k).copied().unwrap_or(0.0) - bins.get(k).copied().unwrap_or(0.0)).abs())
                .sum();
            BpRow {
                n: *nf as usize,
                gamma: *g,
                sigma_mass: s.values().sum(),
                gamma_residual: (g - gamma).abs(),
                sigma_residual: tv,
            }
        })
        .collect();
    let sigma = Measure::atomic(bins.into_iter().map(|(k, v)| (k as f64 * h, v)).collect());
    Ok(BpReport { rows, gamma, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulants::cumulants_to_moments;
    use crate::scalar::{rational, rational_frac, Rational};

    fn r(n: i64) -> Rational {
        rational(n)
    }

    fn triple(eta: Rational, a: Rational, atoms: Vec<(Rational, Rational)>) -> GeneratingTriple<Rational> {
        GeneratingTriple::new(eta, a, LevyMeasure::atomic(atoms).unwrap()).unwrap()
    }

    #[test]
    fn levy_measure_rejects_origin_atom() {
        assert_eq!(LevyMeasure::atomic(vec![(0.0, 1.0)]), Err(LevyError::OriginAtom));
        assert!(LevyMeasure::atomic(vec![(1.0, 1e13)]).is_err());
    }

    #[test]
    fn conversion_examples() {
        let p = triple_to_pair(&triple(r(0), r(1), vec![])).unwrap();
        assert_eq!(p.gamma, r(0));
        assert_eq!(p.sigma, Measure::point(r(0)));

        let lam = rational_frac(3, 2);
        let p = triple_to_pair(&triple(lam.clone(), r(0), vec![(r(1), lam.clone())])).unwrap();
        assert_eq!(p.gamma, lam.clone() / r(2));
        assert_eq!(p.sigma, Measure::atomic(vec![(r(1), lam.clone() / r(2))]));
        assert_eq!(pair_to_triple(&p).unwrap(), triple(lam.clone(), r(0), vec![(r(1), lam)]));

        let p = triple_to_pair(&triple(r(2), r(0), vec![(r(2), r(1))])).unwrap();
        assert_eq!(p.gamma, rational_frac(12, 5));
        assert_eq!(p.sigma, Measure::atomic(vec![(r(2), rational_frac(4, 5))]));

    }

    #[test]
    fn grid_roundtrip_within_tolerance() {
        // Grid avoiding a node at the origin.
        let g = DensityGrid::sample(0.3, 2.3, 400, |x| (x - 0.3) * (2.3 - x));
        let rho = LevyMeasure::new(Measure::atomic(vec![(-0.5, 0.2)]).with_density(g.clone())).unwrap();
        let t = GeneratingTriple::new(0.7, 0.4, rho).unwrap();
        let back = pair_to_triple(&triple_to_pair(&t).unwrap()).unwrap();
        assert!((back.eta - t.eta).abs() < 1e-12, "{}", back.eta - t.eta);
        assert_eq!(back.a, t.a);
        let bg = back.rho.measure().density.as_ref().unwrap();
        let tv: f64 = bg.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * g.h;
        assert!(tv < 1e-6, "{tv}");
    }

    fn random_triple(rng: &mut impl rand::Rng) -> GeneratingTriple<Rational> {
        let atoms = (0..rng.random_range(1..6))
            .map(|_| {
                let mut x = rational_frac(rng.random_range(-40..=40), rng.random_range(1..=10));
                if x == r(0) {
                    x = r(1);
                }
                (x, rational_frac(rng.random_range(1..=30), rng.random_range(1..=7)))
            })
            .collect();
        triple(
            rational_frac(rng.random_range(-20..=20), rng.random_range(1..=9)),
            rational_frac(rng.random_range(0..=20), rng.random_range(1..=9)),
            atoms,
        )
    }

    #[test]
    fn random_atomic_triples_roundtrip_exactly() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let t = random_triple(&mut rng);
            assert_eq!(pair_to_triple(&triple_to_pair(&t).unwrap()).unwrap(), t);
            let v = variation_triple(&t, &VariationMap::power(2).unwrap()).unwrap();
            let k1 = triple_to_cumulants(&v, 1).unwrap().values()[0].clone();
            assert_eq!(k1, t.a.clone() + t.rho.moment(2));
        }
    }

    #[test]
    fn pushforward_examples() {
        let sq = VariationMap::<Rational>::power(2).unwrap();
        let rho = LevyMeasure::atomic(vec![(r(-1), r(1)), (r(1), r(1))]).unwrap();
        assert_eq!(
            pushforward_levy(&rho, &sq).unwrap(),
            LevyMeasure::atomic(vec![(r(1), r(2))]).unwrap()
        );
        let rho = LevyMeasure::atomic(vec![(r(1), r(3))]).unwrap();
        assert_eq!(pushforward_levy(&rho, &sq).unwrap(), rho);
        let cubic = VariationMap::polynomial(vec![r(0), r(-1), r(0), r(1)]).unwrap();
        let rho = LevyMeasure::atomic(vec![(r(1), r(1))]).unwrap();
        assert_eq!(pushforward_levy(&rho, &cubic).unwrap(), LevyMeasure::zero());
    }

    #[test]
    fn pushforward_preserves_integrals_on_densities() {
        let g = DensityGrid::sample(-1.5, 1.2, 2000, |x| (1.5 + x) * (1.2 - x));
        let rho = LevyMeasure::new(Measure::zero().with_density(g)).unwrap();
        let cube = VariationMap::<f64>::power(3).unwrap();
        let pushed = pushforward_levy(&rho, &cube).unwrap();
        let tests: [(&dyn Fn(f64) -> f64, Vec<f64>); 3] = [
            (&|x| x * x, vec![]),
            (&|x| (x * x).min(1.0), vec![-1.0, 1.0]),
            (&|x| if x.abs() > 1.0 { 1.0 } else { 0.0 }, vec![-1.0, 1.0]),
        ];
        for (f, breaks) in tests.iter() {
            let lhs = rho.integrate(|x| f(*x), |x| f(x.powi(3)), &[-1.0, 1.0]);
            let rhs = pushed.integrate(|x| f(*x), f, breaks);
            assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
        }
        // Without declared pieces the binning fallback is used.
        let binned = VariationMap::<f64>::polynomial(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let pushed = pushforward_levy(&rho, &binned).unwrap();
        let lhs = rho.integrate(|x| x * x, |x| x.powi(6), &[]);
        let rhs = pushed.integrate(|x| x * x, |x| x * x, &[]);
        assert!((lhs - rhs).abs() < 1e-3, "{lhs} vs {rhs}");
    }

    #[test]
    fn squares_of_symmetric_triples_live_on_the_half_line() {
        let g = DensityGrid::sample(-2.0, 2.0, 400, |x| (4.0 - x * x) * x * x);
        let rho = LevyMeasure::new(Measure::atomic(vec![(-1.5, 0.5), (1.5, 0.5)]).with_density(g)).unwrap();
        let t = GeneratingTriple::new(0.0, 1.0, rho).unwrap();
        let v = variation_triple(&t, &VariationMap::power(2).unwrap()).unwrap();
        let m = v.rho.measure();
        assert!(m.atoms.iter().all(|(x, _)| *x > 0.0));
        assert!(m.density.as_ref().unwrap().lo >= 0.0);
    }

    #[test]
    fn variation_examples() {
        let id = VariationMap::<Rational>::power(1).unwrap();
        let t = triple(rational_frac(1, 3), r(2), vec![(r(-2), r(1)), (rational_frac(1, 2), r(3))]);
        assert_eq!(variation_triple(&t, &id).unwrap(), t);

        let sq = VariationMap::<Rational>::power(2).unwrap();
        let a = rational_frac(5, 7);
        let t = triple(r(3), a.clone(), vec![(r(1), r(1))]);
        let v = variation_triple(&t, &sq).unwrap();
        assert_eq!(v, triple(a.clone() + r(1), r(0), vec![(r(1), r(1))]));

        let t = triple(r(0), a.clone(), vec![(r(2), r(1))]);
        let v = variation_triple(&t, &sq).unwrap();
        assert_eq!(v, triple(a, r(0), vec![(r(4), r(1))]));
    }

    #[test]
    fn cumulant_examples() {
        let k = triple_to_cumulants(&triple(r(0), r(1), vec![]), 4).unwrap();
        assert_eq!(k.values(), &[r(0), r(1), r(0), r(0)][..]);
        let lam = rational_frac(2, 3);
        let k = triple_to_cumulants(&triple(lam.clone(), r(0), vec![(r(1), lam.clone())]), 5).unwrap();
        assert!(k.values().iter().all(|v| *v == lam));
        let k = triple_to_cumulants(&triple(r(0), r(0), vec![(r(2), r(1))]), 4).unwrap();
        assert_eq!(k.values(), &[r(2), r(4), r(8), r(16)][..]);
        assert!(triple_to_cumulants(&triple(r(0), r(0), vec![]), 13).is_err());
    }

    #[test]
    fn cumulants_match_the_series_of_phi() {
        let g = DensityGrid::sample(-1.8, 1.4, 600, |x| (1.8 + x) * (1.4 - x));
        let rho = LevyMeasure::new(Measure::atomic(vec![(1.7, 0.3), (-0.4, 1.1)]).with_density(g)).unwrap();
        let t = GeneratingTriple::new(-0.3, 0.6, rho).unwrap();
        let k = triple_to_cumulants(&t, 12).unwrap();
        let z = Complex64::new(0.5, 40.0);
        let series: Complex64 =
            k.values().iter().enumerate().map(|(i, v)| *v * z.powi(-(i as i32))).sum();
        let direct = phi_of_triple(&t, z);
        assert!((series - direct).norm() < 1e-10, "{series} vs {direct}");
    }

    #[test]
    fn variation_cumulants_follow_the_power() {
        let rho = LevyMeasure::atomic(vec![
            (rational_frac(-3, 2), rational_frac(1, 4)),
            (rational_frac(1, 3), r(2)),
            (r(2), rational_frac(1, 5)),
        ])
        .unwrap();
        let a = rational_frac(3, 4);
        let t = GeneratingTriple::new(rational_frac(-1, 2), a.clone(), rho.clone()).unwrap();
        for k in 1..=3u32 {
            let v = variation_triple(&t, &VariationMap::power(k).unwrap()).unwrap();
            let kv = triple_to_cumulants(&v, 4).unwrap();
            for m in 1..=4u32 {
                let mut expected = rho.moment(k * m);
                if k == 2 && m == 1 {
                    expected += a.clone();
                }
                if k == 1 {
                    expected = triple_to_cumulants(&t, 4).unwrap().values()[m as usize - 1].clone();
                }
                assert_eq!(kv.values()[m as usize - 1], expected, "k={k} m={m}");
            }
        }
    }

    #[test]
    fn compound_poisson_examples() {
        let t = compound_poisson_triple(&r(1), &Measure::point(r(1))).unwrap();
        assert_eq!(t, triple(r(1), r(0), vec![(r(1), r(1))]));
        let jump = Measure::atomic(vec![(r(-1), rational_frac(1, 2)), (r(1), rational_frac(1, 2))]);
        let t = compound_poisson_triple(&r(2), &jump).unwrap();
        assert_eq!(t, triple(r(0), r(0), vec![(r(-1), r(1)), (r(1), r(1))]));
        let t = compound_poisson_triple(&r(1), &Measure::point(r(2))).unwrap();
        assert_eq!(t, triple(r(0), r(0), vec![(r(2), r(1))]));
        assert_eq!(triple_to_cumulants(&t, 1).unwrap().values()[0], r(2));
        assert!(compound_poisson_triple(&r(1), &Measure::atomic(vec![(r(1), rational_frac(1, 2))])).is_err());
    }

    #[test]
    fn bp_examples() {
        let lam = 1.0;
        let bern = |n: usize| {
            let q = lam / n as f64;
            Measure::atomic(vec![(0.0, 1.0 - q), (1.0, q)])
        };
        let rep = bp_limit_check(&bern, &[10, 100, 1000, 10000], &BpOptions::default()).unwrap();
        assert!((rep.gamma - 0.5).abs() < 1e-3);
        assert_eq!(rep.sigma.atoms.len(), 1);
        assert!((rep.sigma.atoms[0].0 - 1.0).abs() < 1e-12);
        assert!((rep.sigma.atoms[0].1 - 0.5).abs() < 1e-3);
        let induced = pair_to_triple(&rep.pair()).unwrap();
        assert_eq!(induced, compound_poisson_triple(&1.0, &Measure::point(1.0)).unwrap());

        let c = 0.7;
        let drift = |n: usize| Measure::point(c / n as f64);
        let rep = bp_limit_check(&drift, &[100, 1000, 10000], &BpOptions::default()).unwrap();
        assert!((rep.gamma - c).abs() < 1e-6);
        assert!(rep.sigma.total_mass() < 1e-6);

        let sym = |n: usize| {
            let s = 1.0 / (n as f64).sqrt();
            Measure::atomic(vec![(-s, 0.5), (s, 0.5)])
        };
        let rep = bp_limit_check(&sym, &[100, 1000, 10000], &BpOptions::default()).unwrap();
        assert!(rep.gamma.abs() < 1e-12);
        assert_eq!(rep.sigma.atoms.len(), 1);
        assert_eq!(rep.sigma.atoms[0].0, 0.0);
        assert!((rep.sigma.atoms[0].1 - 1.0).abs() < 1e-6);
        let t = pair_to_triple(&rep.pair()).unwrap();
        assert!((t.a - 1.0).abs() < 1e-6);
        assert!(rep.to_csv().starts_with("N,gamma"));
    }

    #[test]
    fn powers_from_pairs() {
        let semicircle = GeneratingPair { gamma: 0.0, sigma: Measure::point(0.0) };
        let half = boxplus_power_of_pair(&semicircle, 0.5, &InversionOptions::default()).unwrap();
        assert!((half.measure.moment(2) - 0.5).abs() < 1e-3);

        // Free Poisson with rate 2 raised to 0.75 is free Poisson with rate 1.5.
        let poisson = triple_to_pair(&compound_poisson_triple(&2.0, &Measure::point(1.0)).unwrap()).unwrap();
        let out = boxplus_power_of_pair(&poisson, 0.75, &InversionOptions::default()).unwrap();
        let k = crate::cumulants::CumulantSequence::new(vec![1.5; 3]);
        let m = cumulants_to_moments(&k).unwrap();
        for (i, v) in m.values().iter().enumerate() {
            let got = out.measure.moment(i as u32 + 1);
            assert!((got - v).abs() < 1e-2 * v, "order {}: {got} vs {v}", i + 1);
        }
    }

    #[test]
    fn triple_json_schema() {
        let t = GeneratingTriple::new(1.0, 0.0, LevyMeasure::atomic(vec![(1.0, 1.0)]).unwrap()).unwrap();
        let v = variation_triple(&t, &VariationMap::power(2).unwrap()).unwrap();
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"eta":1.0,"a":0.0,"rho":{"atoms":[[1.0,1.0]]}}"#);
        let back = GeneratingTriple::from_json(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
        let p = triple_to_pair(&GeneratingTriple::new(0.0, 1.0, LevyMeasure::zero()).unwrap()).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"gamma":0.0,"sigma":{"atoms":[[0.0,1.0]]}}"#);
    }
}
