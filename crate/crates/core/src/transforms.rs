//! Analytic transforms of probability measures on the line.
//!
//! `G_μ(z) = ∫ dμ(x)/(z − x)` on the upper half-plane, `F_μ = 1/G_μ`, and the
//! Voiculescu transform `φ_μ(z) = F_μ^{⟨−1⟩}(z) − z`. Free additive convolution
//! is computed by subordination: with `h(w) = F(w) − w`, the fixed point
//! `ω = z + h_ν(z + h_μ(ω))` gives `G_{μ⊞ν}(z) = G_μ(ω)`.
//!
//! Densities are piecewise-linear on their grid, and the Cauchy transform of
//! that interpolant is evaluated in closed form, so `G` is exact for the
//! measure the grid actually represents.

use num_complex::Complex64;
use thiserror::Error;

use crate::cumulants::{
    self, cumulants_to_moments, moments_to_cumulants, CumulantError, CumulantSequence,
    MomentSequence,
};
use crate::exec::Exec;
use crate::measure::{DensityGrid, Measure, MeasureError};
use crate::scalar::Scalar;

/// A finite measure with atoms and an optional grid density.
pub type GridMeasure = Measure<f64>;
/// A point of the complex plane; transforms require `im > 0`.
pub type ComplexPoint = Complex64;

/// Longest moment sequence computed by [`free_multiply_moments`].
pub const FREE_MULTIPLY_MAX: usize = 8;
/// [`voiculescu`] accepts `z` with `im z ≥ CONE_FACTOR · r`, `r` the support radius about the mean.
pub const CONE_FACTOR: f64 = 2.0;
/// Newton budget for inverting `F` in [`voiculescu`].
pub const VOICULESCU_MAX_ITER: usize = 200;
/// Residual target `|F(w) − z|` in [`voiculescu`].
pub const VOICULESCU_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("z = {re} + {im}i is not in the upper half-plane")]
    NotUpperHalfPlane { re: f64, im: f64 },
    #[error("z = {re} + {im}i is outside the inversion cone im z >= {min_im}")]
    OutsideCone { re: f64, im: f64, min_im: f64 },
    #[error("inversion of F did not converge at z = {re} + {im}i")]
    NoInverse { re: f64, im: f64 },
    #[error("fixed point did not converge within {iterations} iterations at x = {x}, eps = {eps}")]
    NoConvergence { x: f64, eps: f64, iterations: usize },
    #[error("t = {t} < 1 is only admissible for a measure flagged infinitely divisible")]
    NotInfinitelyDivisible { t: f64 },
    #[error("analytic ⊞-power with t = {t} < 1 needs the Lévy-Khintchine data of the law; use cumulant mode or levy::boxplus_power_of_pair")]
    NeedsGeneratingPair { t: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("n = {n} exceeds the bound {max}")]
    TooLong { n: usize, max: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Cumulant(#[from] CumulantError),
}

fn check_upper(z: Complex64) -> Result<(), TransformError> {
    if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(TransformError::NotUpperHalfPlane { re: z.re, im: z.im })
    }
}

/// `ln(1 + w)` without losing precision for small `|w|`.
fn ln_1p(w: Complex64) -> Complex64 {
    let u = Complex64::new(1.0, 0.0) + w;
    if w.norm() > 0.5 {
        return u.ln();
    }
    let d = u - 1.0;
    if d == Complex64::new(0.0, 0.0) {
        w
    } else {
        u.ln() * (w / d)
    }
}

/// `(G(z), G′(z))`, assuming `im z > 0`.
fn cauchy_pair(mu: &GridMeasure, z: Complex64) -> (Complex64, Complex64) {
    let mut g = Complex64::new(0.0, 0.0);
    let mut dg = Complex64::new(0.0, 0.0);
    for &(x, m) in &mu.atoms {
        let r = 1.0 / (z - x);
        g += m * r;
        dg -= m * r * r;
    }
    if let Some(grid) = &mu.density {
        for j in 0..grid.cells() {
            let (f0, f1) = (grid.values[j], grid.values[j + 1]);
            if f0 == 0.0 && f1 == 0.0 {
                continue;
            }
            let (x0, x1) = (grid.node(j), grid.node(j + 1));
            let h = x1 - x0;
            let beta = (f1 - f0) / h;
            let (a, b) = (z - x0, z - x1);
            // ∫ f/(z−x) over the cell, with f(x) = f(z) − β(z − x) for the linear f.
            let fz = f0 + beta * a;
            let l = ln_1p(h / b);
            g += fz * l - beta * h;
            dg += beta * l - fz * h / (a * b);
        }
    }
    (g, dg)
}

/// Cauchy transform `G_μ(z) = ∫ dμ(x)/(z − x)`.
pub fn cauchy(mu: &GridMeasure, z: ComplexPoint) -> Result<Complex64, TransformError> {
    check_upper(z)?;
    Ok(cauchy_pair(mu, z).0)
}

/// `(F(z), F′(z))` with `F = 1/G`.
fn f_pair(mu: &GridMeasure, z: Complex64) -> (Complex64, Complex64) {
    let (g, dg) = cauchy_pair(mu, z);
    let f = 1.0 / g;
    (f, -dg * f * f)
}

fn mean_and_radius(mu: &GridMeasure) -> Result<(f64, f64), TransformError> {
    let mass = mu.total_mass();
    let (lo, hi) = mu
        .support()
        .ok_or_else(|| TransformError::Invalid("measure has empty support".into()))?;
    let mean = mu.moment(1) / mass;
    Ok((mean, (mean - lo).abs().max((hi - mean).abs())))
}

/// Voiculescu transform `φ_μ(z) = F_μ^{⟨−1⟩}(z) − z`.
///
/// The inverse is found by Newton's method on `F(w) = z` from `w₀ = z`. Only
/// points with `im z ≥ CONE_FACTOR · r` are accepted, where `r` bounds the
/// distance of the support from the mean.
pub fn voiculescu(mu: &GridMeasure, z: ComplexPoint) -> Result<Complex64, TransformError> {
    check_upper(z)?;
    let (_, radius) = mean_and_radius(mu)?;
    let min_im = CONE_FACTOR * radius;
    if z.im < min_im {
        return Err(TransformError::OutsideCone { re: z.re, im: z.im, min_im });
    }
    let fail = || TransformError::NoInverse { re: z.re, im: z.im };
    let mut w = z;
    for _ in 0..VOICULESCU_MAX_ITER {
        let (f, df) = f_pair(mu, w);
        let residual = f - z;
        if residual.norm() <= VOICULESCU_TOL {
            return Ok(w - z);
        }
        w -= residual / df;
        if !(w.im > 0.0 && w.re.is_finite()) {
            return Err(fail());
        }
    }
    let (f, _) = f_pair(mu, w);
    if (f - z).norm() <= VOICULESCU_TOL {
        Ok(w - z)
    } else {
        Err(fail())
    }
}

/// Numerical settings for [`free_convolve_with`] and [`boxplus_power_with`].
#[derive(Clone, Debug)]
pub struct InversionOptions {
    /// Number of nodes of the output density grid; `None` picks a spacing
    /// no larger than the smallest `ε`.
    pub nodes: Option<usize>,
    /// Extra room on both sides of the support, in units of the largest `ε`.
    /// The smoothed densities leak past the support edges, and keeping that
    /// mass on the grid is what lets the extrapolation cancel it.
    pub margin_eps: f64,
    /// Heights `ε` for Stieltjes inversion, each half the previous.
    pub eps: [f64; 3],
    /// Budget of fixed-point/Newton steps per grid point.
    pub max_iterations: usize,
    /// Convergence threshold on the subordination point.
    pub tol: f64,
    pub exec: Exec,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions {
            nodes: None,
            margin_eps: 25.0,
            eps: [1e-2, 5e-3, 2.5e-3],
            max_iterations: 500,
            tol: 1e-10,
            exec: Exec::Parallel,
        }
    }
}

/// Output of an analytic convolution: the renormalised measure and the mass
/// the raw inverted density carried before renormalisation.
#[derive(Clone, Debug)]
pub struct Inverted {
    pub measure: GridMeasure,
    pub raw_density_mass: f64,
}

/// Richardson extrapolation to `ε → 0` from values at `ε`, `ε/2`, `ε/4`.
fn richardson(f: [f64; 3]) -> f64 {
    (8.0 * f[2] - 6.0 * f[1] + f[0]) / 3.0
}

/// Samples `x ↦ −Im g(x + iε)/π` on a grid for each `ε` and extrapolates to
/// the boundary value, clipping negative results.
pub fn stieltjes_inversion(
    g: impl Fn(Complex64) -> Complex64 + Sync + Send,
    lo: f64,
    hi: f64,
    cells: usize,
    eps: [f64; 3],
    exec: Exec,
) -> DensityGrid {
    let h = (hi - lo) / cells as f64;
    let values = exec.map_indexed(cells + 1, |j| {
        let x = if j == cells { hi } else { lo + j as f64 * h };
        let f = eps.map(|e| -g(Complex64::new(x, e)).im / std::f64::consts::PI);
        richardson(f).max(0.0)
    });
    DensityGrid { lo, hi, h, values }
}

/// Solves `residual(w; x + iε) = 0` for each `ε` in `targets` (descending) by
/// Newton continuation in the imaginary part, starting from `w = z` high in
/// the upper half-plane where the solution is close to `z`.
fn continuation(
    x: f64,
    targets: &[f64],
    start_height: f64,
    residual: &dyn Fn(Complex64, Complex64) -> (Complex64, Complex64),
    tol: f64,
    max_iterations: usize,
) -> Result<Vec<Complex64>, TransformError> {
    let fail = |eps: f64, iterations: usize| TransformError::NoConvergence { x, eps, iterations };
    let mut used = 0usize;
    let mut out = Vec::with_capacity(targets.len());
    let mut y = start_height.max(targets[0]);
    let mut w = Complex64::new(x, y);
    let newton = |w0: Complex64, z: Complex64, used: &mut usize| -> Option<Complex64> {
        let mut w = w0;
        let (mut g, mut dg) = residual(w, z);
        for _ in 0..40 {
            *used += 1;
            if *used > max_iterations || !(g.re.is_finite() && g.im.is_finite()) {
                return None;
            }
            let mut step = g / dg;
            // Iterates may approach the real axis but never cross it.
            let clamp = |v: Complex64| Complex64::new(v.re, v.im.max(1e-3 * w.im));
            let mut next = clamp(w - step);
            let mut trial = residual(next, z);
            let mut tries = 0;
            while !(trial.0.norm() <= g.norm() * (1.0 + 1e-12)) {
                tries += 1;
                if tries > 30 {
                    return None;
                }
                step *= 0.5;
                next = clamp(w - step);
                trial = residual(next, z);
            }
            let moved = (next - w).norm();
            w = next;
            (g, dg) = trial;
            if moved <= tol * w.norm().max(1.0) {
                return Some(w);
            }
        }
        None
    };
    for &target in targets {
        while y > target {
            let mut next_y = (0.5 * y).max(target);
            loop {
                let z = Complex64::new(x, next_y);
                // Predict by shifting along the imaginary axis.
                let guess = w + Complex64::new(0.0, next_y - y);
                let guess = if guess.im > 0.0 { guess } else { w };
                if let Some(sol) = newton(guess, z, &mut used) {
                    w = sol;
                    y = next_y;
                    break;
                }
                if used > max_iterations || (y - next_y) < 1e-9 * y {
                    return Err(fail(target, used.min(max_iterations)));
                }
                next_y = 0.5 * (y + next_y);
            }
        }
        let z = Complex64::new(x, target);
        w = newton(w, z, &mut used).ok_or_else(|| fail(target, used.min(max_iterations)))?;
        out.push(w);
    }
    Ok(out)
}

fn check_probability(mu: &GridMeasure, which: &str) -> Result<(), TransformError> {
    mu.validate()?;
    let mass = mu.total_mass();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(TransformError::Invalid(format!(
            "{which} has total mass {mass}, expected a probability measure"
        )));
    }
    Ok(())
}

fn single_atom(mu: &GridMeasure) -> Option<f64> {
    match (&mu.atoms[..], &mu.density) {
        ([(c, _)], None) => Some(*c),
        ([(c, _)], Some(g)) if g.mass() == 0.0 => Some(*c),
        _ => None,
    }
}

/// Inverts `G` on a grid and assembles a probability measure from the known
/// atoms and the renormalised density.
#[allow(clippy::too_many_arguments)]
fn assemble(
    lo: f64,
    hi: f64,
    atoms: Vec<(f64, f64)>,
    start_height: f64,
    residual: &(dyn Fn(Complex64, Complex64) -> (Complex64, Complex64) + Sync),
    g_of_solution: &(dyn Fn(Complex64) -> Complex64 + Sync),
    opts: &InversionOptions,
) -> Result<Inverted, TransformError> {
    let pad = opts.margin_eps * opts.eps[0];
    let (lo, hi) = (lo - pad, hi + pad);
    let nodes = opts.nodes.unwrap_or_else(|| ((hi - lo) / opts.eps[2]).ceil() as usize + 1).max(801);
    if opts.nodes.is_some_and(|n| n < 2) {
        return Err(TransformError::Invalid("need at least two grid nodes".into()));
    }
    let nodes = opts.nodes.unwrap_or(nodes);
    let cells = nodes - 1;
    let h = (hi - lo) / cells as f64;
    let atom_mass: f64 = atoms.iter().map(|a| a.1).sum();
    let rows = opts.exec.map_indexed(nodes, |j| {
        let x = if j == cells { hi } else { lo + j as f64 * h };
        let ws = continuation(x, &opts.eps, start_height, residual, opts.tol, opts.max_iterations)?;
        let mut f = [0.0; 3];
        for (i, (w, &e)) in ws.iter().zip(&opts.eps).enumerate() {
            let g = g_of_solution(*w);
            let own: f64 = atoms
                .iter()
                .map(|&(a, m)| m * e / ((x - a) * (x - a) + e * e))
                .sum();
            f[i] = (-g.im - own) / std::f64::consts::PI;
        }
        Ok(richardson(f).max(0.0))
    });
    let values: Vec<f64> = rows.into_iter().collect::<Result<_, TransformError>>()?;
    let mut grid = DensityGrid { lo, hi, h, values };
    let raw = grid.mass();
    let target = (1.0 - atom_mass).max(0.0);
    let mut measure = Measure::atomic(atoms);
    if raw > 0.0 && target > 1e-12 {
        let k = target / raw;
        grid.values.iter_mut().for_each(|v| *v *= k);
        measure = measure.with_density(grid);
    }
    Ok(Inverted { measure, raw_density_mass: raw })
}

/// `μ ⊞ ν`, the distribution of `a + b` for free `a ~ μ`, `b ~ ν`.
pub fn free_convolve(mu: &GridMeasure, nu: &GridMeasure) -> Result<GridMeasure, TransformError> {
    free_convolve_with(mu, nu, &InversionOptions::default()).map(|r| r.measure)
}

pub fn free_convolve_with(
    mu: &GridMeasure,
    nu: &GridMeasure,
    opts: &InversionOptions,
) -> Result<Inverted, TransformError> {
    check_probability(mu, "first measure")?;
    check_probability(nu, "second measure")?;
    if let Some(c) = single_atom(mu) {
        return Ok(Inverted { measure: nu.translate(c), raw_density_mass: nu.density_mass() });
    }
    if let Some(c) = single_atom(nu) {
        return Ok(Inverted { measure: mu.translate(c), raw_density_mass: mu.density_mass() });
    }
    let (lo_a, hi_a) = mu.support().expect("probability measure has support");
    let (lo_b, hi_b) = nu.support().expect("probability measure has support");
    // An atom survives only where μ{a} + ν{b} > 1.
    let mut atoms = Vec::new();
    for &(a, ma) in &mu.atoms {
        for &(b, mb) in &nu.atoms {
            if ma + mb > 1.0 + 1e-12 {
                atoms.push((a + b, ma + mb - 1.0));
            }
        }
    }
    let residual = |w: Complex64, z: Complex64| {
        let (fa, dfa) = f_pair(mu, w);
        let w2 = z + fa - w;
        let (fb, dfb) = f_pair(nu, w2);
        (z + fb - w2 - w, (dfb - 1.0) * (dfa - 1.0) - 1.0)
    };
    let g = |w: Complex64| cauchy_pair(mu, w).0;
    let spread = (hi_a - lo_a) + (hi_b - lo_b);
    assemble(lo_a + lo_b, hi_a + hi_b, atoms, spread.max(1.0), &residual, &g, opts)
}

/// ⊞-power in cumulant mode: `κₙ ↦ t κₙ`.
///
/// `t ≥ 1` is always admissible; `0 < t < 1` needs the caller to assert that
/// the underlying law is ⊞-infinitely divisible.
pub fn boxplus_power_cumulants<S: Scalar>(
    kappa: &CumulantSequence<S>,
    t: &S,
    infinitely_divisible: bool,
) -> Result<CumulantSequence<S>, TransformError> {
    check_power(t.to_float(), infinitely_divisible)?;
    Ok(kappa.scale(t))
}

fn check_power(t: f64, infinitely_divisible: bool) -> Result<(), TransformError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(TransformError::Invalid(format!("power t = {t} must be positive")));
    }
    if t < 1.0 && !infinitely_divisible {
        return Err(TransformError::NotInfinitelyDivisible { t });
    }
    Ok(())
}

/// `μ^{⊞t}` in analytic mode.
pub fn boxplus_power(
    mu: &GridMeasure,
    t: f64,
    infinitely_divisible: bool,
) -> Result<GridMeasure, TransformError> {
    boxplus_power_with(mu, t, infinitely_divisible, &InversionOptions::default()).map(|r| r.measure)
}

/// `μ^{⊞t}` via `F_{μ_t}(z) = F_μ(ω)` where `t ω − (t − 1) F_μ(ω) = z`,
/// which is `φ_{μ_t} = t φ_μ` read through the inverse of `F`.
///
/// For `t < 1` the subordination `ω` leaves the upper half-plane, and the
/// extension of `φ_μ` that `μ^{⊞t}` needs cannot be read off samples of `G_μ`;
/// an ID-flagged request then reports [`TransformError::NeedsGeneratingPair`].
pub fn boxplus_power_with(
    mu: &GridMeasure,
    t: f64,
    infinitely_divisible: bool,
    opts: &InversionOptions,
) -> Result<Inverted, TransformError> {
    check_power(t, infinitely_divisible)?;
    check_probability(mu, "measure")?;
    if t == 1.0 {
        return Ok(Inverted { measure: mu.clone(), raw_density_mass: mu.density_mass() });
    }
    if let Some(c) = single_atom(mu) {
        return Ok(Inverted { measure: Measure::point(t * c), raw_density_mass: 0.0 });
    }
    if t < 1.0 {
        return Err(TransformError::NeedsGeneratingPair { t });
    }
    let (mean, radius) = mean_and_radius(mu)?;
    let half = radius * t;
    let atoms = mu
        .atoms
        .iter()
        .filter(|&&(_, m)| t * m - (t - 1.0) > 1e-12)
        .map(|&(a, m)| (t * a, t * m - (t - 1.0)))
        .collect();
    let residual = |w: Complex64, z: Complex64| {
        let (f, df) = f_pair(mu, w);
        (t * w - (t - 1.0) * f - z, t - (t - 1.0) * df)
    };
    let g = |w: Complex64| cauchy_pair(mu, w).0;
    assemble(t * mean - half, t * mean + half, atoms, (2.0 * half).max(1.0), &residual, &g, opts)
}

/// The law whose Voiculescu transform is `phi`, extended to the whole upper
/// half-plane (as for ⊞-infinitely divisible laws), inverted on `[lo, hi]`.
///
/// `phi` returns `(φ(u), φ′(u))`; `F(z) = u` solves `u + φ(u) = z`.
pub fn law_from_voiculescu(
    phi: &(dyn Fn(Complex64) -> (Complex64, Complex64) + Sync),
    lo: f64,
    hi: f64,
    opts: &InversionOptions,
) -> Result<Inverted, TransformError> {
    let residual = |u: Complex64, z: Complex64| {
        let (p, dp) = phi(u);
        (u + p - z, 1.0 + dp)
    };
    let g = |u: Complex64| 1.0 / u;
    assemble(lo, hi, Vec::new(), (hi - lo).max(1.0), &residual, &g, opts)
}

/// Image of `μ` under `x ↦ s x`.
pub fn dilate(mu: &GridMeasure, s: f64) -> GridMeasure {
    mu.dilate(s)
}

/// First `n` moments of `ab` for free `a`, `b`:
/// `τ((ab)ᵏ) = Σ_{π∈NC(k)} κ_π[a] · m_{K(π)}[b]`.
pub fn free_multiply_moments<S: Scalar>(
    m_a: &MomentSequence<S>,
    m_b: &MomentSequence<S>,
    n: usize,
) -> Result<MomentSequence<S>, TransformError> {
    if n > FREE_MULTIPLY_MAX {
        return Err(TransformError::TooLong { n, max: FREE_MULTIPLY_MAX });
    }
    if n == 0 {
        return Ok(MomentSequence::new(Vec::new()));
    }
    for (seq, which) in [(m_a, "first"), (m_b, "second")] {
        if seq.len() < n {
            return Err(TransformError::Invalid(format!(
                "{which} sequence has {} moments, {n} needed",
                seq.len()
            )));
        }
    }
    let kappa_a = moments_to_cumulants(&m_a.clone().truncate(n))?;
    let out = (1..=n)
        .map(|k| cumulants::kreweras_product_moment(k, kappa_a.values(), &m_b.values()[..n]))
        .collect::<Result<Vec<S>, _>>()?;
    Ok(MomentSequence::new(out))
}

/// Moments of `μ^{⊞t}` from the moments of `μ`, exactly in cumulant mode.
pub fn boxplus_power_moments<S: Scalar>(
    m: &MomentSequence<S>,
    t: &S,
    infinitely_divisible: bool,
) -> Result<MomentSequence<S>, TransformError> {
    let kappa = moments_to_cumulants(m)?;
    Ok(cumulants_to_moments(&boxplus_power_cumulants(&kappa, t, infinitely_divisible)?)?)
}
