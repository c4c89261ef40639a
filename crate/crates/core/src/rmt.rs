//! Random-matrix realisations of free compound Poisson processes and the
//! Monte Carlo checks built on them.
//!
//! `τ` is the normalised trace `tr/d`. A free compound Poisson process with
//! rate λ and jump law ν is modelled as `X(t) = s e(t) s`, with `s` a GUE
//! sample and `e(t)` diagonal with entries `v_m 1{u_m ≤ λt}`. The marks
//! `u_m ~ U(0,1]`, `v_m ~ ν` are drawn once per coordinate, so increments over
//! any time grid telescope.
//!
//! Complex matrices are kept as real and imaginary `f64` parts so every
//! product runs through the real BLAS-style kernel.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cumulants::{cumulants_to_moments, CumulantError, MomentSequence};
use crate::exec::Exec;
use crate::levy::{self, LevyError, VariationMap};
use crate::measure::Measure;
use crate::ncsym::{self, NcAlgebra, NcsymError};
use crate::Scalar;

/// Brute-force bounds of [`verify_integral_identity`].
pub const IDENTITY_MAX_N: usize = 6;
pub const IDENTITY_MAX_K: usize = 5;
/// Agreement required by the integral identity (it is exact at every `d`).
pub const IDENTITY_TOL: f64 = 1e-10;
/// Moment orders reported by [`verify_variation`]; the last is informational.
pub const VARIATION_ORDERS: usize = 5;
/// `|z|` bound for the checked moment orders.
pub const Z_BOUND: f64 = 4.0;
const HISTOGRAM_BINS: usize = 60;

const TAG_GUE: u64 = 1;
const TAG_MARKS: u64 = 2;
const TAG_INCREMENT: u64 = 16;

#[derive(Debug, Error)]
pub enum RmtError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bound exceeded: {0}")]
    Bounds(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    Cumulant(#[from] CumulantError),
    #[error(transparent)]
    Ncsym(#[from] NcsymError),
}

/// A dense complex matrix stored as `re + i·im`.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { re: DMatrix::zeros(rows, cols), im: DMatrix::zeros(rows, cols) }
    }

    pub fn identity(d: usize) -> Self {
        CMat { re: DMatrix::identity(d, d), im: DMatrix::zeros(d, d) }
    }

    pub fn from_complex(m: &DMatrix<Complex64>) -> Self {
        CMat { re: m.map(|z| z.re), im: m.map(|z| z.im) }
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        self.re.zip_map(&self.im, Complex64::new)
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[(i, j)], self.im[(i, j)])
    }

    pub fn mul(&self, b: &CMat) -> CMat {
        let mut re = &self.re * &b.re;
        re.gemm(-1.0, &self.im, &b.im, 1.0);
        let mut im = &self.re * &b.im;
        im.gemm(1.0, &self.im, &b.re, 1.0);
        CMat { re, im }
    }

    /// `self · b*`.
    pub fn mul_adj(&self, b: &CMat) -> CMat {
        let (br, bi) = (b.re.transpose(), b.im.transpose());
        let mut re = &self.re * &br;
        re.gemm(1.0, &self.im, &bi, 1.0);
        let mut im = &self.im * &br;
        im.gemm(-1.0, &self.re, &bi, 1.0);
        CMat { re, im }
    }

    /// `self* · b`.
    pub fn adj_mul(&self, b: &CMat) -> CMat {
        let (ar, ai) = (self.re.transpose(), self.im.transpose());
        let mut re = &ar * &b.re;
        re.gemm(1.0, &ai, &b.im, 1.0);
        let mut im = &ar * &b.im;
        im.gemm(-1.0, &ai, &b.re, 1.0);
        CMat { re, im }
    }

    pub fn adjoint(&self) -> CMat {
        CMat { re: self.re.transpose(), im: -self.im.transpose() }
    }

    /// `self += c·b`.
    pub fn add_scaled(&mut self, b: &CMat, c: f64) {
        self.re.zip_apply(&b.re, |x, y| *x += c * y);
        self.im.zip_apply(&b.im, |x, y| *x += c * y);
    }

    pub fn sub(&self, b: &CMat) -> CMat {
        CMat { re: &self.re - &b.re, im: &self.im - &b.im }
    }

    pub fn frobenius(&self) -> f64 {
        (self.re.norm_squared() + self.im.norm_squared()).sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        Complex64::new(self.re.trace(), self.im.trace())
    }

    /// `(h + h*)/2`.
    pub fn hermitize(&mut self) {
        let n = self.nrows();
        for j in 0..n {
            self.im[(j, j)] = 0.0;
            for i in 0..j {
                let r = 0.5 * (self.re[(i, j)] + self.re[(j, i)]);
                let m = 0.5 * (self.im[(i, j)] - self.im[(j, i)]);
                self.re[(i, j)] = r;
                self.re[(j, i)] = r;
                self.im[(i, j)] = m;
                self.im[(j, i)] = -m;
            }
        }
    }

    fn columns(&self, idx: &[usize]) -> CMat {
        CMat { re: self.re.select_columns(idx), im: self.im.select_columns(idx) }
    }

    fn scale_columns(&mut self, w: &[f64]) {
        for (j, &c) in w.iter().enumerate() {
            self.re.column_mut(j).scale_mut(c);
            self.im.column_mut(j).scale_mut(c);
        }
    }

    fn scale_rows(&mut self, w: &[f64]) {
        for (i, &c) in w.iter().enumerate() {
            self.re.row_mut(i).scale_mut(c);
            self.im.row_mut(i).scale_mut(c);
        }
    }

    fn hstack(parts: &[CMat], rows: usize) -> CMat {
        let cols = parts.iter().map(CMat::ncols).sum();
        let mut out = CMat::zeros(rows, cols);
        let mut at = 0;
        for p in parts {
            out.re.columns_mut(at, p.ncols()).copy_from(&p.re);
            out.im.columns_mut(at, p.ncols()).copy_from(&p.im);
            at += p.ncols();
        }
        out
    }

    fn diagonal(w: &[f64]) -> CMat {
        CMat { re: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(w)), im: DMatrix::zeros(w.len(), w.len()) }
    }
}

impl NcAlgebra for CMat {
    fn zero_like(&self) -> Self {
        CMat::zeros(self.nrows(), self.ncols())
    }
    fn mul(&self, rhs: &Self) -> Self {
        CMat::mul(self, rhs)
    }
    fn add_scaled(&mut self, rhs: &Self, c: f64) {
        CMat::add_scaled(self, rhs, c)
    }
}

/// A Hermitian `d × d` matrix, the finite-dimensional stand-in for an element of `(𝒜, τ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianSample(CMat);

impl HermitianSample {
    /// Checks squareness and `‖h − h*‖_max ≤ 1e−12·max(1, ‖h‖_max)`.
    pub fn new(m: CMat) -> Result<Self, RmtError> {
        let d = m.nrows();
        if m.ncols() != d || d == 0 {
            return Err(RmtError::Config(format!("{}×{} matrix is not square", d, m.ncols())));
        }
        let scale = m.re.amax().max(m.im.amax()).max(1.0);
        for j in 0..d {
            for i in 0..=j {
                let dr = (m.re[(i, j)] - m.re[(j, i)]).abs();
                let di = (m.im[(i, j)] + m.im[(j, i)]).abs();
                if dr.max(di) > 1e-12 * scale {
                    return Err(RmtError::Numeric(format!("entry ({i},{j}) breaks Hermitian symmetry")));
                }
            }
        }
        Ok(HermitianSample(m))
    }

    fn symmetrized(mut m: CMat) -> Self {
        m.hermitize();
        HermitianSample(m)
    }

    pub fn identity(d: usize) -> Self {
        HermitianSample(CMat::identity(d))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        HermitianSample(CMat::diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    /// `τ(h) = tr(h)/d`.
    pub fn tau(&self) -> f64 {
        self.0.re.trace() / self.dim() as f64
    }

    pub fn scale(&self, c: f64) -> Self {
        HermitianSample(CMat { re: &self.0.re * c, im: &self.0.im * c })
    }
}

/// A ChaCha stream keyed on `(master seed, trial, object tag)`.
fn stream(master: u64, trial: usize, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((trial as u64) << 20) | tag);
    rng
}

fn gue_from(d: usize, rng: &mut impl Rng) -> HermitianSample {
    let diag_sd = (1.0 / d as f64).sqrt();
    let off_sd = (0.5 / d as f64).sqrt();
    let mut m = CMat::zeros(d, d);
    for j in 0..d {
        m.re[(j, j)] = diag_sd * rng.sample::<f64, _>(StandardNormal);
        for i in 0..j {
            let a = off_sd * rng.sample::<f64, _>(StandardNormal);
            let b = off_sd * rng.sample::<f64, _>(StandardNormal);
            m.re[(i, j)] = a;
            m.re[(j, i)] = a;
            m.im[(i, j)] = b;
            m.im[(j, i)] = -b;
        }
    }
    HermitianSample(m)
}

/// GUE with off-diagonal complex entries and real diagonal of variance `1/d`.
pub fn sample_gue(d: usize, seed: u64) -> Result<HermitianSample, RmtError> {
    if d < 2 {
        return Err(RmtError::Config(format!("dimension d = {d} must be at least 2")));
    }
    Ok(gue_from(d, &mut stream(seed, 0, TAG_GUE)))
}

/// Independent GUE increments `X_1, …, X_n`, one stream per index.
pub fn random_hermitian_increments(d: usize, n: usize, seed: u64, trial: usize) -> Vec<HermitianSample> {
    (0..n).map(|i| gue_from(d, &mut stream(seed, trial, TAG_INCREMENT + i as u64))).collect()
}

/// Monte Carlo setup for a free compound Poisson process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub d: usize,
    pub trials: usize,
    pub master_seed: u64,
    /// Number of time increments.
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub lambda: f64,
    /// Atomic probability measure, `{"atoms": [[x, p], …]}`.
    pub jump: Measure<f64>,
    pub k_max: usize,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, RmtError> {
        let c: SimConfig = serde_json::from_str(text).map_err(|e| RmtError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), RmtError> {
        let bad = |m: String| Err(RmtError::Config(m));
        if self.d < 2 {
            return bad(format!("d = {} must be at least 2", self.d));
        }
        if self.trials == 0 || self.n == 0 || self.k_max == 0 {
            return bad("trials, N and k_max must be positive".into());
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return bad(format!("t = {} must lie in (0, 1]", self.t));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda = {} must be positive", self.lambda));
        }
        if self.lambda * self.t > 1.0 {
            return bad(format!(
                "lambda·t = {} exceeds 1, outside the normalised-rate convention",
                self.lambda * self.t
            ));
        }
        if self.jump.density.is_some() || self.jump.atoms.is_empty() {
            return bad("jump must be a non-empty atomic measure".into());
        }
        self.jump.validate().map_err(|e| RmtError::Config(e.to_string()))?;
        if self.jump.atoms.iter().any(|(x, m)| *x == 0.0 && *m > 0.0) {
            return bad("jump atoms must be non-zero".into());
        }
        let mass = self.jump.atom_mass();
        if (mass - 1.0).abs() > 1e-9 {
            return bad(format!("jump mass {mass} is not 1"));
        }
        Ok(())
    }

    /// Exact moments `m_1..m_n` of `X⁽ᵏ⁾(t)` through the triple pipeline.
    pub fn predicted_variation_moments(&self, k: u32, n: usize) -> Result<MomentSequence<f64>, RmtError> {
        let triple = levy::compound_poisson_triple(&(self.lambda * self.t), &self.jump)?;
        let v = levy::variation_triple(&triple, &VariationMap::power(k)?)?;
        Ok(cumulants_to_moments(&levy::triple_to_cumulants(&v, n)?)?)
    }

    /// Moments of `Σᵢ X_{i,n}ᵏ` in the limit `d → ∞` at fixed `n`, where the
    /// increments are free with `κ_m(X_{i,n}) = (λt/n) ∫ xᵐ dν`. `None` when
    /// `k·orders` exceeds the cumulant table.
    pub fn predicted_power_sum_moments(
        &self,
        k: u32,
        n: usize,
        orders: usize,
    ) -> Result<Option<MomentSequence<f64>>, RmtError> {
        let top = k as usize * orders;
        if top > crate::partitions::NC_MAX {
            return Ok(None);
        }
        let rate = self.lambda * self.t / n as f64;
        let kappa: Vec<f64> = (1..=top as i32)
            .map(|m| rate * self.jump.atoms.iter().map(|(x, p)| p * x.powi(m)).sum::<f64>())
            .collect();
        let m = cumulants_to_moments(&crate::cumulants::CumulantSequence::new(kappa))?;
        let powered = MomentSequence::new((1..=orders).map(|j| m.values()[k as usize * j - 1]).collect());
        let kappa_power = crate::cumulants::moments_to_cumulants(&powered)?.scale(&(n as f64));
        Ok(Some(cumulants_to_moments(&kappa_power)?))
    }
}

/// One sampled path: the GUE `s` and the per-coordinate marks `(u_m, v_m)`.
#[derive(Clone, Debug)]
pub struct CpPath {
    s: HermitianSample,
    marks: Vec<(f64, f64)>,
    /// `λt`; coordinate `m` jumps in the window iff `u_m ≤ λt`.
    horizon: f64,
}

impl CpPath {
    /// The path of `trial`; `family` separates independent copies sharing a seed.
    pub fn sample(config: &SimConfig, trial: usize, family: u64) -> Result<Self, RmtError> {
        config.validate()?;
        let tag = family << 8;
        let s = gue_from(config.d, &mut stream(config.master_seed, trial, tag | TAG_GUE));
        let mut rng = stream(config.master_seed, trial, tag | TAG_MARKS);
        let atoms = &config.jump.atoms;
        let marks = (0..config.d)
            .map(|_| {
                let u = 1.0 - rng.random::<f64>();
                let mut p = rng.random::<f64>();
                let mut v = atoms[atoms.len() - 1].0;
                for &(x, m) in atoms {
                    if p < m {
                        v = x;
                        break;
                    }
                    p -= m;
                }
                (u, v)
            })
            .collect();
        Ok(CpPath { s, marks, horizon: config.lambda * config.t })
    }

    pub fn s(&self) -> &HermitianSample {
        &self.s
    }

    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    /// Coordinates jumping in each of the `n` windows `(λ(i−1)t/n, λit/n]`.
    pub fn increment_coords(&self, n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n];
        for (m, &(u, _)) in self.marks.iter().enumerate() {
            if u <= self.horizon {
                let i = ((u / self.horizon * n as f64).ceil() as usize).clamp(1, n);
                out[i - 1].push(m);
            }
        }
        out
    }

    fn jumps(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&m| self.marks[m].1).collect()
    }

    /// `X_{i,n} = s (e(it/n) − e((i−1)t/n)) s`, densely.
    pub fn increments(&self, n: usize) -> Vec<HermitianSample> {
        self.increment_coords(n)
            .iter()
            .map(|idx| {
                let mut left = self.s.0.columns(idx);
                let right = left.clone();
                left.scale_columns(&self.jumps(idx));
                HermitianSample::symmetrized(left.mul_adj(&right))
            })
            .collect()
    }

    /// `Σᵢ X_{i,n}ᵏ`, using `X = S_I V S_I*` so that `Xᵏ = S_I V (G V)^{k−1} S_I*`, `G = S_I* S_I`.
    pub fn power_sum(&self, n: usize, k: u32) -> HermitianSample {
        if k == 1 {
            // The windows partition the jumping coordinates, so Σ Xᵢ = X(t) term by term.
            return self.target(1);
        }
        let d = self.dim();
        let mut lefts = Vec::new();
        let mut cols = Vec::new();
        for idx in self.increment_coords(n) {
            if idx.is_empty() {
                continue;
            }
            let v = self.jumps(&idx);
            let s_i = self.s.0.columns(&idx);
            let g = s_i.adj_mul(&s_i);
            let mut m = CMat::diagonal(&v);
            for _ in 1..k {
                m = m.mul(&g);
                m.scale_columns(&v);
            }
            lefts.push(s_i.mul(&m));
            cols.extend(idx);
        }
        if cols.is_empty() {
            return HermitianSample(CMat::zeros(d, d));
        }
        let left = CMat::hstack(&lefts, d);
        HermitianSample::symmetrized(left.mul_adj(&self.s.0.columns(&cols)))
    }

    /// `s e(t)ᵏ s`, the finite-d realisation of `X⁽ᵏ⁾(t)`.
    pub fn target(&self, k: u32) -> HermitianSample {
        let idx: Vec<usize> = (0..self.dim()).filter(|&m| self.marks[m].0 <= self.horizon).collect();
        let w: Vec<f64> = self.jumps(&idx).iter().map(|v| v.powi(k as i32)).collect();
        let right = self.s.0.columns(&idx);
        let mut left = right.clone();
        left.scale_columns(&w);
        HermitianSample::symmetrized(left.mul_adj(&right))
    }
}

/// The `n` increments of a sampled path, densely.
pub fn sample_cp_increments(config: &SimConfig, trial: usize) -> Result<Vec<HermitianSample>, RmtError> {
    Ok(CpPath::sample(config, trial, 0)?.increments(config.n))
}

/// `Σᵢ Xᵢᵏ` by repeated multiplication.
pub fn power_sums(increments: &[HermitianSample], k: u32) -> Result<HermitianSample, RmtError> {
    let first = increments.first().ok_or_else(|| RmtError::Config("no increments".into()))?;
    if k == 0 {
        return Err(RmtError::Config("power k must be at least 1".into()));
    }
    let d = first.dim();
    let mut total = CMat::zeros(d, d);
    for x in increments {
        let mut p = x.0.clone();
        for _ in 1..k {
            p = p.mul(&x.0);
            p.hermitize();
        }
        total.add_scaled(&p, 1.0);
    }
    Ok(HermitianSample::symmetrized(total))
}

/// Sorted eigenvalues.
pub fn esd(h: &HermitianSample) -> Result<Vec<f64>, RmtError> {
    let eig = nalgebra::SymmetricEigen::try_new(h.0.to_complex(), f64::EPSILON, 100_000)
        .ok_or_else(|| RmtError::Numeric("Hermitian eigensolver did not converge".into()))?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `τ(hᵐ)` for `m = 1..n` by repeated multiplication.
pub fn trace_moments(h: &HermitianSample, n: usize) -> MomentSequence<f64> {
    let d = h.dim() as f64;
    let mut out = Vec::with_capacity(n);
    let mut p = h.0.clone();
    for m in 1..=n {
        out.push(p.re.trace() / d);
        if m < n {
            p = p.mul(&h.0);
            p.hermitize();
        }
    }
    MomentSequence::new(out)
}

/// `(I ⊗ τ)(B ⊗ 1 − Σ Aᵢ ⊗ xᵢ)⁻¹` for `Im B ≻ 0`.
pub fn matricial_cauchy(
    b: &DMatrix<Complex64>,
    a: &[DMatrix<Complex64>],
    x: &[HermitianSample],
) -> Result<DMatrix<Complex64>, RmtError> {
    let k = b.nrows();
    if b.ncols() != k || k == 0 {
        return Err(RmtError::Config("B must be square".into()));
    }
    if a.len() != x.len() {
        return Err(RmtError::Config(format!("{} coefficient matrices for {} samples", a.len(), x.len())));
    }
    if a.iter().any(|m| m.nrows() != k || m.ncols() != k) {
        return Err(RmtError::Config("coefficients must match the size of B".into()));
    }
    let d = x.first().map_or(1, HermitianSample::dim);
    if x.iter().any(|s| s.dim() != d) {
        return Err(RmtError::Config("samples must share one dimension".into()));
    }
    let im_b = (b - b.adjoint()).map(|z| z * Complex64::new(0.0, -0.5));
    if nalgebra::Cholesky::new(im_b).is_none() {
        return Err(RmtError::Config("Im B is not positive definite".into()));
    }
    let xs: Vec<DMatrix<Complex64>> = x.iter().map(|s| s.0.to_complex()).collect();
    let big = DMatrix::from_fn(k * d, k * d, |r, c| {
        let (p, m) = (r / d, r % d);
        let (q, n) = (c / d, c % d);
        let mut v = if m == n { b[(p, q)] } else { Complex64::new(0.0, 0.0) };
        for (ai, xi) in a.iter().zip(&xs) {
            v -= ai[(p, q)] * xi[(m, n)];
        }
        v
    });
    let inv = big
        .lu()
        .try_inverse()
        .ok_or_else(|| RmtError::Numeric("block system is singular".into()))?;
    Ok(DMatrix::from_fn(k, k, |p, q| {
        (0..d).map(|m| inv[(p * d + m, q * d + m)]).sum::<Complex64>() / d as f64
    }))
}

/// Complex matrices in JSON, row-major, entries `[re, im]`.
pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

/// Setup for [`matcauchy_report`]: `xᵢ` is a GUE sample of size `d` seeded by `seed + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatCauchyConfig {
    pub d: usize,
    pub seed: u64,
    pub b: JsonMatrix,
    pub a: Vec<JsonMatrix>,
    /// Optional reference value, compared entrywise.
    #[serde(default)]
    pub expected: Option<JsonMatrix>,
    #[serde(default = "default_matcauchy_tol")]
    pub tolerance: f64,
}

fn default_matcauchy_tol() -> f64 {
    1e-2
}

impl MatCauchyConfig {
    pub fn from_json(text: &str) -> Result<Self, RmtError> {
        serde_json::from_str(text).map_err(|e| RmtError::Config(e.to_string()))
    }
}

fn from_json_matrix(m: &JsonMatrix, what: &str) -> Result<DMatrix<Complex64>, RmtError> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(RmtError::Config(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(rows, cols, |r, c| Complex64::new(m[r][c][0], m[r][c][1])))
}

fn to_json_matrix(m: &DMatrix<Complex64>) -> JsonMatrix {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

/// Evaluates [`matricial_cauchy`] on GUE samples; checks `Im G ≺ 0` and, if given, the reference.
pub fn matcauchy_report(config: &MatCauchyConfig) -> Result<SimReport, RmtError> {
    if config.d == 0 {
        return Err(RmtError::Config("d must be positive".into()));
    }
    let b = from_json_matrix(&config.b, "b")?;
    let a = config.a.iter().map(|m| from_json_matrix(m, "a")).collect::<Result<Vec<_>, _>>()?;
    let x = (0..a.len())
        .map(|i| sample_gue(config.d, config.seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let g = matricial_cauchy(&b, &a, &x)?;
    if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(RmtError::Numeric("matricial Cauchy value is not finite".into()));
    }
    let mut report = SimReport::new("matcauchy", to_value(config));
    let im_g = (&g - g.adjoint()).map(|z| z * Complex64::new(0.0, -0.5));
    let top = im_g.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    report.checks.push(Check {
        name: "lower-half-plane".into(),
        pass: top < 0.0,
        value: top,
        detail: "largest eigenvalue of Im G is negative".into(),
    });
    if let Some(e) = &config.expected {
        let e = from_json_matrix(e, "expected")?;
        if e.shape() != g.shape() {
            return Err(RmtError::Config("expected must match the size of b".into()));
        }
        let err = g.iter().zip(e.iter()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        report.checks.push(Check {
            name: "expected".into(),
            pass: err <= config.tolerance,
            value: err,
            detail: format!("max entrywise error within {}", config.tolerance),
        });
    }
    report.result = Some(serde_json::to_value(to_json_matrix(&g)).expect("matrices serialise"));
    report.summary = format!("k={} d={} terms={}", g.nrows(), config.d, a.len());
    Ok(report)
}

/// Mean and standard error across trials.
fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub order: usize,
    pub mean: f64,
    pub stderr: f64,
    pub predicted: Option<f64>,
    pub z: Option<f64>,
    /// Informational: the free-limit prediction at the simulated `N` rather than `N → ∞`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finite_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_finite_n: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub detail: String,
}

/// Eigenvalue counts on `bins` equal cells of `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn from_samples(samples: &[f64], bins: usize) -> Self {
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        };
        let w = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for &x in samples {
            counts[(((x - lo) / w) as usize).min(bins - 1)] += 1;
        }
        Histogram { lo, hi, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `bin_lo,bin_hi,count` rows.
    pub fn to_csv(&self) -> String {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        let mut s = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", self.lo + i as f64 * w, self.lo + (i + 1) as f64 * w, c));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub kind: String,
    pub config: serde_json::Value,
    pub moments: Vec<MomentRow>,
    /// Named diagnostics indexed by `N` (proxy norms, mixed m₂, growth tables, errors).
    pub series: BTreeMap<String, Vec<SeriesPoint>>,
    pub histograms: BTreeMap<String, Histogram>,
    pub checks: Vec<Check>,
    /// Computed object for reports that produce one (the matricial Cauchy value).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
    /// Key parameters for the one-line summary, e.g. `k=2 maxz=1.70 n=64`.
    pub summary: String,
    pub version: String,
}

impl SimReport {
    fn new(kind: &str, config: serde_json::Value) -> Self {
        SimReport {
            kind: kind.into(),
            config,
            moments: Vec::new(),
            series: BTreeMap::new(),
            histograms: BTreeMap::new(),
            checks: Vec::new(),
            result: None,
            summary: String::new(),
            version: crate::VERSION.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary_line(&self) -> String {
        format!("{} {} {}", if self.passed() { "PASS" } else { "FAIL" }, self.kind, self.summary)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise")
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("configs serialise")
}

/// `4, 8, 16, …` below `n`, then `n`.
pub fn doubling_schedule(n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(4usize), |m| Some(m * 2)).take_while(|&m| m < n).collect();
    out.push(n);
    out
}

fn count_inversions(series: &[SeriesPoint]) -> usize {
    series.windows(2).filter(|w| w[1].mean > w[0].mean).count()
}

/// Spectral moments of `Σ X_{i,N}ᵏ` against those of `X⁽ᵏ⁾(t)`, plus the
/// Frobenius proxy `‖Σ X_{i,N}ᵏ − s e(t)ᵏ s‖_F/√d` along a doubling schedule in `N`.
pub fn verify_variation(config: &SimConfig, k: u32, exec: Exec) -> Result<SimReport, RmtError> {
    config.validate()?;
    if k == 0 {
        return Err(RmtError::Config("power k must be at least 1".into()));
    }
    let predicted = config.predicted_variation_moments(k, VARIATION_ORDERS)?;
    let finite = config.predicted_power_sum_moments(k, config.n, VARIATION_ORDERS)?;
    let schedule = doubling_schedule(config.n);
    let per_trial = exec.map_indexed(config.trials, |trial| -> Result<_, RmtError> {
        let path = CpPath::sample(config, trial, 0)?;
        let target = path.target(k);
        let sqrt_d = (config.d as f64).sqrt();
        let mut proxies = Vec::with_capacity(schedule.len());
        let mut last = None;
        for &n in &schedule {
            let y = path.power_sum(n, k);
            proxies.push(y.0.sub(&target.0).frobenius() / sqrt_d);
            last = Some(y);
        }
        let y = last.expect("schedule ends at N");
        Ok((trace_moments(&y, VARIATION_ORDERS).values().to_vec(), proxies, esd(&y)?))
    });
    let per_trial: Vec<_> = per_trial.into_iter().collect::<Result<_, _>>()?;

    let mut report = SimReport::new("variation", to_value(config));
    let mut max_z: f64 = 0.0;
    let mut z_ok = true;
    for order in 1..=VARIATION_ORDERS {
        let xs: Vec<f64> = per_trial.iter().map(|t| t.0[order - 1]).collect();
        let (mean, stderr) = mean_stderr(&xs);
        let exact = predicted.values()[order - 1];
        let z = (mean - exact) / stderr;
        let z = if z.is_finite() { Some(z) } else if mean == exact { Some(0.0) } else { None };
        if order < VARIATION_ORDERS {
            match z {
                Some(v) => {
                    max_z = max_z.max(v.abs());
                    z_ok &= v.abs() <= Z_BOUND;
                }
                None => z_ok = false,
            }
        }
        let finite_n = finite.as_ref().map(|m| m.values()[order - 1]);
        let z_finite_n = finite_n.map(|f| (mean - f) / stderr).filter(|z| z.is_finite());
        report.moments.push(MomentRow { order, mean, stderr, predicted: Some(exact), z, finite_n, z_finite_n });
    }
    let proxy: Vec<SeriesPoint> = schedule
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let xs: Vec<f64> = per_trial.iter().map(|t| t.1[j]).collect();
            let (mean, stderr) = mean_stderr(&xs);
            SeriesPoint { n, mean, stderr }
        })
        .collect();
    let inversions = count_inversions(&proxy);
    report.checks.push(Check {
        name: "moments".into(),
        pass: z_ok,
        value: max_z,
        detail: format!("|z| ≤ {Z_BOUND} for orders 1..{}; order {VARIATION_ORDERS} informational", VARIATION_ORDERS - 1),
    });
    report.checks.push(Check {
        name: "proxy_monotone".into(),
        pass: inversions <= 1,
        value: inversions as f64,
        detail: "Frobenius proxy decreasing in N with at most one inversion".into(),
    });
    report.series.insert("proxy".into(), proxy);
    let eigs: Vec<f64> = per_trial.iter().flat_map(|t| t.2.iter().copied()).collect();
    report.histograms.insert("power_sum".into(), Histogram::from_samples(&eigs, HISTOGRAM_BINS));
    report.summary = format!("k={k} maxz={max_z:.2} n={}", config.n);
    Ok(report)
}

/// `Σ_{i₁ ≠ i₂ ≠ … ≠ i_k} X_{i₁} ⋯ X_{i_k}` by enumeration of index tuples.
pub fn distinct_neighbor_products(increments: &[HermitianSample], k: usize) -> CMat {
    fn rec(xs: &[HermitianSample], prefix: &CMat, last: usize, left: usize, acc: &mut CMat) {
        if left == 0 {
            acc.add_scaled(prefix, 1.0);
            return;
        }
        for (i, x) in xs.iter().enumerate() {
            if i != last {
                rec(xs, &prefix.mul(&x.0), i, left - 1, acc);
            }
        }
    }
    let d = increments[0].dim();
    let mut acc = CMat::zeros(d, d);
    for (i, x) in increments.iter().enumerate() {
        rec(increments, &x.0, i, k - 1, &mut acc);
    }
    acc
}

/// Relative Frobenius gap between both sides of
/// `Σ_{neighbour-distinct} X_{i₁}⋯X_{i_k} = Σⱼ (−1)^{k−j} Σ_{m₁+…+mⱼ=k} Y_{m₁}⋯Y_{mⱼ}`,
/// `Y_m = Σᵢ Xᵢᵐ`.
///
/// The gap is measured against the largest of `‖LHS‖`, `‖RHS‖` and
/// `Σ |c| ‖Y_{m₁}‖⋯‖Y_{mⱼ}‖`, the size of the terms that cancel on the right.
/// Both sides vanish for `N = 1`, `k ≥ 2`, where only that last scale is meaningful.
pub fn integral_identity_error(increments: &[HermitianSample], k: usize) -> Result<f64, RmtError> {
    if increments.is_empty() || increments.len() > IDENTITY_MAX_N || k == 0 || k > IDENTITY_MAX_K {
        return Err(RmtError::Bounds(format!(
            "need 1 ≤ N ≤ {IDENTITY_MAX_N} and 1 ≤ k ≤ {IDENTITY_MAX_K}, got N = {}, k = {k}",
            increments.len()
        )));
    }
    let lhs = distinct_neighbor_products(increments, k);
    let d = increments[0].dim();
    let ys: Vec<CMat> = (1..=k as u32)
        .map(|j| power_sums(increments, j).map(HermitianSample::into_matrix))
        .collect::<Result<_, _>>()?;
    let poly = ncsym::stochastic_integral_poly(k)?;
    let rhs = poly.evaluate(&CMat::identity(d), |j| ys[j as usize - 1].clone());
    let norms: Vec<f64> = ys.iter().map(CMat::frobenius).collect();
    let term_scale: f64 = poly
        .terms()
        .map(|(w, c)| c.to_float().abs() * w.flatten().iter().map(|&g| norms[g as usize - 1]).product::<f64>())
        .sum();
    let scale = lhs.frobenius().max(rhs.frobenius()).max(term_scale).max(f64::MIN_POSITIVE);
    Ok(lhs.sub(&rhs).frobenius() / scale)
}

/// The integral identity on independent GUE increments, one draw per trial.
pub fn verify_integral_identity(config: &SimConfig, k: usize, exec: Exec) -> Result<SimReport, RmtError> {
    config.validate()?;
    if config.n > IDENTITY_MAX_N || k == 0 || k > IDENTITY_MAX_K {
        return Err(RmtError::Bounds(format!(
            "identity check needs N ≤ {IDENTITY_MAX_N} and 1 ≤ k ≤ {IDENTITY_MAX_K}, got N = {}, k = {k}",
            config.n
        )));
    }
    let errs = exec.map_indexed(config.trials, |trial| {
        integral_identity_error(&random_hermitian_increments(config.d, config.n, config.master_seed, trial), k)
    });
    let errs: Vec<f64> = errs.into_iter().collect::<Result<_, _>>()?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let (mean, stderr) = mean_stderr(&errs);
    let mut report = SimReport::new("identity", to_value(config));
    report.series.insert("relerr".into(), vec![SeriesPoint { n: config.n, mean, stderr }]);
    report.checks.push(Check {
        name: "relerr".into(),
        pass: worst <= IDENTITY_TOL,
        value: worst,
        detail: format!("max relative Frobenius error ≤ {IDENTITY_TOL:e}"),
    });
    report.summary = format!("k={k} relerr={worst:.2e} n={} d={}", config.n, config.d);
    Ok(report)
}

/// Which mixed sum [`mixed_decay`] tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixedMode {
    /// `Σ (XᵢYᵢ + YᵢXᵢ)`.
    Anticommutator,
    /// `Σ XᵢYᵢ`, with `m₂ = τ(ZZ*)`.
    Product,
    /// `Σ (Xᵢ + Yᵢ)² − Σ Xᵢ² − Σ Yᵢ²`.
    SquareOfSum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedOptions {
    pub ns: Vec<usize>,
    /// Pass requires the final `m₂` to be at most this multiple of the first.
    pub ratio: f64,
}

impl Default for MixedOptions {
    fn default() -> Self {
        MixedOptions { ns: vec![8, 16, 32, 64], ratio: 0.15 }
    }
}

/// `U M U*` with `U` the columns of `s` at `idx` and `M = diag(v)`.
struct Block {
    u: CMat,
    v: Vec<f64>,
}

fn blocks(path: &CpPath, n: usize) -> Vec<Block> {
    path.increment_coords(n)
        .into_iter()
        .map(|idx| Block { u: path.s.0.columns(&idx), v: path.jumps(&idx) })
        .collect()
}

fn mixed_m2(a: &CpPath, b: &CpPath, n: usize, mode: MixedMode) -> f64 {
    let d = a.dim();
    let (ba, bb) = (blocks(a, n), blocks(b, n));
    let z = match mode {
        MixedMode::Anticommutator | MixedMode::Product => {
            // XᵢYᵢ = S_I [V (S_I* T_K) W] T_K*, summed as one stacked product.
            let mut lefts = Vec::new();
            let mut rights = Vec::new();
            for (x, y) in ba.iter().zip(&bb) {
                if x.v.is_empty() || y.v.is_empty() {
                    continue;
                }
                let mut core = x.u.adj_mul(&y.u);
                core.scale_rows(&x.v);
                core.scale_columns(&y.v);
                lefts.push(x.u.mul(&core));
                rights.push(y.u.clone());
            }
            if lefts.is_empty() {
                return 0.0;
            }
            let p = CMat::hstack(&lefts, d).mul_adj(&CMat::hstack(&rights, d));
            if mode == MixedMode::Product {
                p
            } else {
                let mut z = p.adjoint();
                z.add_scaled(&p, 1.0);
                z
            }
        }
        MixedMode::SquareOfSum => {
            let mut lefts = Vec::new();
            let mut rights = Vec::new();
            for (x, y) in ba.iter().zip(&bb) {
                let u = CMat::hstack(&[x.u.clone(), y.u.clone()], d);
                if u.ncols() == 0 {
                    continue;
                }
                let w: Vec<f64> = x.v.iter().chain(&y.v).copied().collect();
                let mut core = u.adj_mul(&u);
                core.scale_rows(&w);
                core.scale_columns(&w);
                lefts.push(u.mul(&core));
                rights.push(u);
            }
            let mut z = if lefts.is_empty() {
                CMat::zeros(d, d)
            } else {
                CMat::hstack(&lefts, d).mul_adj(&CMat::hstack(&rights, d))
            };
            z.add_scaled(&a.power_sum(n, 2).0, -1.0);
            z.add_scaled(&b.power_sum(n, 2).0, -1.0);
            z
        }
    };
    let f = z.frobenius();
    f * f / d as f64
}

/// `m₂` of a mixed sum of two independent increment families along `opts.ns`.
pub fn mixed_decay(
    a: &SimConfig,
    b: &SimConfig,
    mode: MixedMode,
    opts: &MixedOptions,
    exec: Exec,
) -> Result<SimReport, RmtError> {
    a.validate()?;
    b.validate()?;
    if a.d != b.d || a.trials != b.trials {
        return Err(RmtError::Config("both families need the same d and trials".into()));
    }
    if opts.ns.is_empty() || opts.ns.contains(&0) {
        return Err(RmtError::Config("ns must be a non-empty list of positive integers".into()));
    }
    let per_trial = exec.map_indexed(a.trials, |trial| -> Result<Vec<f64>, RmtError> {
        let pa = CpPath::sample(a, trial, 0)?;
        let pb = CpPath::sample(b, trial, 1)?;
        Ok(opts.ns.iter().map(|&n| mixed_m2(&pa, &pb, n, mode)).collect())
    });
    let per_trial: Vec<Vec<f64>> = per_trial.into_iter().collect::<Result<_, _>>()?;
    let series: Vec<SeriesPoint> = opts
        .ns
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let xs: Vec<f64> = per_trial.iter().map(|t| t[j]).collect();
            let (mean, stderr) = mean_stderr(&xs);
            SeriesPoint { n, mean, stderr }
        })
        .collect();
    let first = series[0].mean;
    let last = series[series.len() - 1].mean;
    let ratio = if first > 0.0 { last / first } else { 0.0 };
    let decreasing = count_inversions(&series) == 0;
    let mut report = SimReport::new(
        "mixed",
        serde_json::json!({ "a": to_value(a), "b": to_value(b), "mode": mode, "options": to_value(opts) }),
    );
    report.checks.push(Check {
        name: "decreasing".into(),
        pass: decreasing,
        value: count_inversions(&series) as f64,
        detail: "m2 decreasing along ns".into(),
    });
    report.checks.push(Check {
        name: "ratio".into(),
        pass: ratio <= opts.ratio,
        value: ratio,
        detail: format!("final m2 ≤ {} × initial", opts.ratio),
    });
    report.series.insert("m2".into(), series);
    report.summary = format!("mode={mode:?} ratio={ratio:.4} n={}", opts.ns[opts.ns.len() - 1]);
    Ok(report)
}

/// `Σ_{i ≤ 2Nt} X_{i,N}²` for the scalar increments `X_{i,N} = 1/N + (−1)ⁱ/N^α`.
pub fn counterexample_sum(alpha: f64, t: f64, n: usize) -> f64 {
    let nf = n as f64;
    let steps = (2.0 * nf * t).floor() as usize;
    (1..=steps)
        .map(|i| {
            let x = 1.0 / nf + if i % 2 == 0 { 1.0 } else { -1.0 } / nf.powf(alpha);
            x * x
        })
        .sum()
}

/// Growth table of the counterexample against `2t N^{1−2α}`, within `rel_tol`.
pub fn counterexample_report(alpha: f64, t: f64, ns: &[usize], rel_tol: f64) -> Result<SimReport, RmtError> {
    if !(alpha > 0.0 && alpha < 1.0) || !(t > 0.0) || ns.is_empty() {
        return Err(RmtError::Config("need 0 < α < 1, t > 0 and a non-empty N list".into()));
    }
    let mut report = SimReport::new("counterexample", serde_json::json!({ "alpha": alpha, "t": t, "ns": ns }));
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for &n in ns {
        let sum = counterexample_sum(alpha, t, n);
        let trend = 2.0 * t * (n as f64).powf(1.0 - 2.0 * alpha);
        worst = worst.max((sum / trend - 1.0).abs());
        rows.push(SeriesPoint { n, mean: sum, stderr: 0.0 });
        report.moments.push(MomentRow {
            order: n,
            mean: sum,
            stderr: 0.0,
            predicted: Some(trend),
            z: None,
            finite_n: None,
            z_finite_n: None,
        });
    }
    report.series.insert("sum_sq".into(), rows);
    report.checks.push(Check {
        name: "trend".into(),
        pass: worst <= rel_tol,
        value: worst,
        detail: format!("Σ X² within {rel_tol} of 2t·N^(1−2α)"),
    });
    report.summary = format!("alpha={alpha} maxrel={worst:.2e}");
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::with_threads;
    use crate::transforms;

    fn cfg(d: usize, trials: usize, n: usize, jump: Vec<(f64, f64)>) -> SimConfig {
        SimConfig { d, trials, master_seed: 11, n, t: 1.0, lambda: 1.0, jump: Measure::atomic(jump), k_max: 2 }
    }

    #[test]
    fn gue_moments() {
        let m = trace_moments(&sample_gue(1000, 3).unwrap(), 4);
        let v = m.values();
        assert!(v[0].abs() < 0.05, "{}", v[0]);
        assert!((v[1] - 1.0).abs() < 0.05, "{}", v[1]);
        assert!((v[3] - 2.0).abs() < 0.1, "{}", v[3]);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(10, 1, 4, vec![(1.0, 1.0)]);
        assert!(c.validate().is_ok());
        c.lambda = 2.0;
        assert!(matches!(c.validate(), Err(RmtError::Config(_))));
        let c = cfg(10, 1, 4, vec![(0.0, 1.0)]);
        assert!(c.validate().is_err());
        let json = r#"{"d":10,"trials":2,"master_seed":5,"N":4,"t":1.0,"lambda":1.0,"jump":{"atoms":[[1.0,1.0]]},"k_max":2}"#;
        assert_eq!(SimConfig::from_json(json).unwrap().n, 4);
    }

    #[test]
    fn poisson_one_is_s_squared() {
        let c = cfg(60, 1, 1, vec![(1.0, 1.0)]);
        let path = CpPath::sample(&c, 0, 0).unwrap();
        let x = &path.increments(1)[0];
        let s2 = path.s().matrix().mul(path.s().matrix());
        assert!(x.matrix().sub(&s2).frobenius() < 1e-12 * s2.frobenius());
    }

    #[test]
    fn increments_telescope() {
        let c = cfg(40, 1, 8, vec![(-1.0, 0.5), (2.0, 0.5)]);
        let path = CpPath::sample(&c, 0, 0).unwrap();
        let total = path.target(1);
        for n in [1, 3, 8, 20] {
            let parts = path.increments(n);
            assert_eq!(parts.len(), n);
            let sum = power_sums(&parts, 1).unwrap();
            assert!(sum.matrix().sub(total.matrix()).frobenius() < 1e-12 * total.matrix().frobenius());
            assert_eq!(path.power_sum(n, 1), total);
        }
        let sizes: usize = path.increment_coords(8).iter().map(Vec::len).sum();
        assert_eq!(sizes, c.d);
    }

    #[test]
    fn free_poisson_second_moment() {
        let c = cfg(500, 20, 1, vec![(1.0, 1.0)]);
        let xs: Vec<f64> = (0..c.trials)
            .map(|trial| trace_moments(&CpPath::sample(&c, trial, 0).unwrap().target(1), 2).values()[1])
            .collect();
        let (mean, stderr) = mean_stderr(&xs);
        assert!((mean - 2.0).abs() <= 3.0 * stderr.max(1e-3), "{mean} ± {stderr}");
    }

    #[test]
    fn factored_power_sums_match_dense() {
        let c = cfg(30, 1, 5, vec![(-0.5, 0.3), (1.5, 0.7)]);
        let path = CpPath::sample(&c, 2, 0).unwrap();
        for k in 1..=4 {
            let dense = power_sums(&path.increments(5), k).unwrap();
            let fast = path.power_sum(5, k);
            let gap = fast.matrix().sub(dense.matrix()).frobenius();
            assert!(gap <= 1e-10 * dense.matrix().frobenius(), "k={k}: {gap}");
        }
    }

    #[test]
    fn projection_targets() {
        let c = cfg(40, 1, 4, vec![(1.0, 1.0)]);
        let path = CpPath::sample(&c, 0, 0).unwrap();
        assert_eq!(path.target(3), path.target(1));
        let c = SimConfig { lambda: 0.5, ..cfg(400, 10, 4, vec![(2.0, 1.0)]) };
        let taus: Vec<f64> = (0..c.trials).map(|i| CpPath::sample(&c, i, 0).unwrap().target(2).tau()).collect();
        let (mean, stderr) = mean_stderr(&taus);
        assert!((mean - 2.0).abs() < 4.0 * stderr + 0.02, "{mean} ± {stderr}");
    }

    #[test]
    fn predicted_variation_moments() {
        let c = cfg(10, 1, 4, vec![(1.0, 1.0)]);
        let m = c.predicted_variation_moments(2, 5).unwrap();
        assert_eq!(m.values(), &[1.0, 2.0, 5.0, 14.0, 42.0][..]);
        let c = cfg(10, 1, 4, vec![(-1.0, 0.5), (1.0, 0.5)]);
        let triple = levy::compound_poisson_triple(&1.0, &c.jump).unwrap();
        let v = levy::variation_triple(&triple, &VariationMap::power(3).unwrap()).unwrap();
        let k = levy::triple_to_cumulants(&v, 4).unwrap();
        assert_eq!(k.values(), &[0.0, 1.0, 0.0, 1.0][..]);
    }

    #[test]
    fn finite_n_prediction_tends_to_the_limit() {
        let c = cfg(10, 1, 4, vec![(1.0, 1.0)]);
        let one = c.predicted_power_sum_moments(2, 1, 5).unwrap().unwrap();
        // N = 1: Σ X² = X(1)², whose moments are the even free Poisson moments.
        assert_eq!(one.values(), &[2.0, 14.0, 132.0, 1430.0, 16796.0][..]);
        let limit = c.predicted_variation_moments(2, 5).unwrap();
        let far = c.predicted_power_sum_moments(2, 1 << 20, 5).unwrap().unwrap();
        for (a, b) in far.values().iter().zip(limit.values()) {
            assert!((a - b).abs() < 1e-4 * b);
        }
        let m1 = c.predicted_power_sum_moments(2, 64, 1).unwrap().unwrap().values()[0];
        assert!((m1 - (1.0 + 1.0 / 64.0)).abs() < 1e-12);
        assert!(c.predicted_power_sum_moments(3, 4, 5).unwrap().is_none());
    }

    #[test]
    fn identity_small_cases() {
        let xs = random_hermitian_increments(10, 4, 9, 0);
        assert_eq!(integral_identity_error(&xs, 1).unwrap(), 0.0);
        let sum = power_sums(&xs, 1).unwrap().into_matrix();
        let mut expected = sum.mul(&sum);
        expected.add_scaled(&power_sums(&xs, 2).unwrap().into_matrix(), -1.0);
        let lhs = distinct_neighbor_products(&xs, 2);
        assert!(lhs.sub(&expected).frobenius() <= 1e-12 * expected.frobenius());
        let xs = random_hermitian_increments(50, 5, 9, 1);
        assert!(integral_identity_error(&xs, 4).unwrap() <= IDENTITY_TOL);
        assert!(matches!(integral_identity_error(&xs, 6), Err(RmtError::Bounds(_))));
    }

    #[test]
    fn mixed_zero_and_counterexample() {
        let c = cfg(20, 1, 4, vec![(1.0, 1.0)]);
        let a = CpPath::sample(&c, 0, 0).unwrap();
        let mut zero = a.clone();
        zero.marks.iter_mut().for_each(|m| m.0 = 2.0);
        assert_eq!(mixed_m2(&a, &zero, 4, MixedMode::Anticommutator), 0.0);
        let anti = mixed_m2(&a, &CpPath::sample(&c, 0, 1).unwrap(), 4, MixedMode::Anticommutator);
        let square = mixed_m2(&a, &CpPath::sample(&c, 0, 1).unwrap(), 4, MixedMode::SquareOfSum);
        assert!((anti - square).abs() <= 1e-10 * anti);
        let rep = counterexample_report(0.25, 1.0, &[100, 10000], 0.05).unwrap();
        assert!(rep.passed());
    }

    #[test]
    fn matricial_cauchy_reductions() {
        let b = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(1.0, 2.0), Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.3), Complex64::new(-1.0, 1.0),
        ]);
        let inv = b.clone().try_inverse().unwrap();
        assert!((matricial_cauchy(&b, &[], &[]).unwrap() - inv).norm() < 1e-12);

        let x = sample_gue(200, 5).unwrap();
        let z = Complex64::new(0.0, 2.0);
        let scalar = matricial_cauchy(&DMatrix::from_element(1, 1, z), &[DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0))], std::slice::from_ref(&x)).unwrap()[(0, 0)];
        let direct: Complex64 = esd(&x).unwrap().iter().map(|l| 1.0 / (z - l)).sum::<Complex64>() / 200.0;
        assert!((scalar - direct).norm() < 1e-10);

        let a1 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]));
        let g = matricial_cauchy(&(DMatrix::identity(2, 2) * z), &[a1], &[x]).unwrap();
        let semicircle = transforms::cauchy(&Measure::<f64>::semicircle_quadrature(1.0, 400), z).unwrap();
        assert!((g[(0, 0)] - semicircle).norm() < 0.02, "{} vs {semicircle}", g[(0, 0)]);
        assert!((g[(1, 1)] - 1.0 / z).norm() < 1e-12);
        assert!(g[(0, 1)].norm() < 1e-12);
        assert!(matricial_cauchy(&DMatrix::identity(1, 1), &[], &[]).is_err());
    }

    #[test]
    fn esd_examples() {
        let id = HermitianSample::identity(5);
        assert_eq!(esd(&id).unwrap(), vec![1.0; 5]);
        assert_eq!(trace_moments(&id, 3).values(), &[1.0, 1.0, 1.0][..]);
        let d = 400;
        let diag: Vec<f64> = (1..=d).map(|i| i as f64 / d as f64).collect();
        let m1 = trace_moments(&HermitianSample::from_real_diagonal(&diag), 1).values()[0];
        assert!((m1 - 0.5).abs() < 2.0 / d as f64);
        let h = sample_gue(200, 8).unwrap();
        let eig = esd(&h).unwrap();
        let via_powers = trace_moments(&h, 6);
        for (m, v) in via_powers.values().iter().enumerate() {
            let via_eig = eig.iter().map(|l| l.powi(m as i32 + 1)).sum::<f64>() / 200.0;
            assert!((v - via_eig).abs() <= 1e-8 * via_eig.abs().max(1e-3), "order {}", m + 1);
        }
    }

    #[test]
    fn reports_identical_across_thread_counts() {
        let c = SimConfig { trials: 3, ..cfg(40, 3, 8, vec![(1.0, 1.0)]) };
        let one = with_threads(1, || verify_variation(&c, 2, Exec::Parallel).unwrap().to_json());
        let four = with_threads(4, || verify_variation(&c, 2, Exec::Parallel).unwrap().to_json());
        let seq = verify_variation(&c, 2, Exec::Sequential).unwrap().to_json();
        assert_eq!(one, four);
        assert_eq!(one, seq);
        let rep = verify_variation(&c, 2, Exec::Sequential).unwrap();
        assert_eq!(rep.histograms["power_sum"].total(), (c.d * c.trials) as u64);
        assert_eq!(rep.series["proxy"].len(), doubling_schedule(8).len());
    }
}
