//! Finite atomic-plus-density measures on the real line.
//!
//! A [`Measure`] is a list of atoms together with an optional density sampled
//! on a uniform grid. Between grid nodes the density is the linear interpolant
//! of the node values; all integrals against the density are integrals of that
//! interpolant, so the total density mass is exactly the trapezoid sum.
//!
//! Serialised form (field names are part of the file format):
//!
//! ```json
//! {"atoms": [[x, m], ...], "grid": {"lo": -2.0, "hi": 2.0, "h": 0.01, "values": [...]}}
//! ```

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("grid needs lo < hi and h > 0 with (hi - lo)/h + 1 = {expected} values, got {got}")]
    GridShape { expected: usize, got: usize },
    #[error("negative or non-finite {what} at index {index}")]
    BadValue { what: &'static str, index: usize },
    #[error("invalid measure JSON: {0}")]
    Json(String),
}

/// Density values on the nodes `lo, lo + h, …, hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub lo: f64,
    pub hi: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

// 5-point Gauss-Legendre on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

impl DensityGrid {
    /// Samples `f` on `cells + 1` nodes spanning `[lo, hi]`; negative samples are clipped to 0.
    pub fn sample(lo: f64, hi: f64, cells: usize, f: impl Fn(f64) -> f64) -> Self {
        let h = (hi - lo) / cells as f64;
        let values = (0..=cells).map(|j| f(lo + j as f64 * h).max(0.0)).collect();
        DensityGrid { lo, hi, h, values }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        let ok_shape = self.lo < self.hi && self.h > 0.0 && self.h.is_finite();
        let expected = if ok_shape { ((self.hi - self.lo) / self.h).round() as usize + 1 } else { 0 };
        let span_ok = ok_shape
            && (((expected - 1) as f64) * self.h - (self.hi - self.lo)).abs()
                <= 1e-9 * (self.hi - self.lo).abs().max(1.0);
        if !span_ok || expected != self.values.len() {
            return Err(MeasureError::GridShape { expected, got: self.values.len() });
        }
        for (i, v) in self.values.iter().enumerate() {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(MeasureError::BadValue { what: "density value", index: i });
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn node(&self, j: usize) -> f64 {
        if j + 1 == self.values.len() {
            self.hi
        } else {
            self.lo + j as f64 * self.h
        }
    }

    /// Linear interpolant, zero outside `[lo, hi]`.
    pub fn interp(&self, x: f64) -> f64 {
        if !(x >= self.lo && x <= self.hi) || self.values.is_empty() {
            return 0.0;
        }
        let t = (x - self.lo) / self.h;
        let j = (t.floor() as usize).min(self.cells().saturating_sub(1));
        let frac = t - j as f64;
        self.values[j] * (1.0 - frac) + self.values[(j + 1).min(self.cells())] * frac
    }

    /// Trapezoid mass (exact mass of the linear interpolant).
    pub fn mass(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        self.h * (self.values.iter().sum::<f64>() - 0.5 * (self.values[0] + self.values[n - 1]))
    }

    /// `∫ f(x) ρ(x) dx` for the interpolated density `ρ`.
    ///
    /// Each cell is split at the supplied breakpoints and integrated with
    /// 5-point Gauss-Legendre, so piecewise-smooth `f` with kinks or jumps at
    /// the breakpoints is handled accurately.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
        let mut sorted: Vec<f64> =
            breaks.iter().copied().filter(|b| *b > self.lo && *b < self.hi).collect();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let mut next_break = 0;
        let mut total = 0.0;
        for j in 0..self.cells() {
            let (a, b) = (self.node(j), self.node(j + 1));
            let (va, vb) = (self.values[j], self.values[j + 1]);
            if va == 0.0 && vb == 0.0 {
                while next_break < sorted.len() && sorted[next_break] <= b {
                    next_break += 1;
                }
                continue;
            }
            let dens = |x: f64| va + (vb - va) * (x - a) / (b - a);
            let mut left = a;
            while next_break < sorted.len() && sorted[next_break] < b {
                let cut = sorted[next_break];
                if cut > left {
                    total += gauss(&f, &dens, left, cut);
                    left = cut;
                }
                next_break += 1;
            }
            total += gauss(&f, &dens, left, b);
        }
        total
    }
}

fn gauss(f: &impl Fn(f64) -> f64, dens: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(t, w)| {
            let x = mid + half * t;
            w * f(x) * dens(x)
        })
        .sum::<f64>()
        * half
}

/// Atoms `(location, mass)` plus an optional grid density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: DeserializeOwned"))]
pub struct Measure<S = f64> {
    #[serde(default)]
    pub atoms: Vec<(S, S)>,
    #[serde(default, rename = "grid", skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityGrid>,
}

impl<S: Scalar> Measure<S> {
    pub fn zero() -> Self {
        Measure { atoms: Vec::new(), density: None }
    }

    pub fn point(x: S) -> Self {
        Measure { atoms: vec![(x, S::one())], density: None }
    }

    pub fn atomic(atoms: Vec<(S, S)>) -> Self {
        let mut m = Measure { atoms, density: None };
        m.merge_atoms();
        m
    }

    pub fn with_density(mut self, grid: DensityGrid) -> Self {
        self.density = Some(grid);
        self
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        for (i, (x, m)) in self.atoms.iter().enumerate() {
            if !x.is_finite_value() {
                return Err(MeasureError::BadValue { what: "atom location", index: i });
            }
            if !m.is_finite_value() || *m < S::zero() {
                return Err(MeasureError::BadValue { what: "atom mass", index: i });
            }
        }
        if let Some(g) = &self.density {
            g.validate()?;
        }
        Ok(())
    }

    /// Sorts atoms by location, merges equal locations and drops zero masses.
    pub fn merge_atoms(&mut self) {
        let mut atoms = std::mem::take(&mut self.atoms);
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut merged: Vec<(S, S)> = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            match merged.last_mut() {
                Some((y, w)) if *y == x => *w = w.clone() + m,
                _ => merged.push((x, m)),
            }
        }
        merged.retain(|(_, m)| !m.is_zero());
        self.atoms = merged;
    }

    pub fn atom_mass(&self) -> S {
        self.atoms.iter().fold(S::zero(), |acc, (_, m)| acc + m.clone())
    }

    pub fn density_mass(&self) -> f64 {
        self.density.as_ref().map_or(0.0, DensityGrid::mass)
    }

    pub fn total_mass(&self) -> S {
        self.atom_mass() + S::from_float(self.density_mass())
    }

    /// `Σ mᵢ f(xᵢ)` over the atoms.
    pub fn integrate_atoms(&self, f: impl Fn(&S) -> S) -> S {
        self.atoms.iter().fold(S::zero(), |acc, (x, m)| acc + m.clone() * f(x))
    }

    /// `∫ f dρ` over the density part (zero when absent).
    pub fn integrate_density(&self, f: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
        self.density.as_ref().map_or(0.0, |g| g.integrate(f, breaks))
    }

    /// Multiplies every mass and density value by `c ≥ 0`.
    pub fn scale(&self, c: &S) -> Self {
        let cf = c.to_float();
        Measure {
            atoms: self.atoms.iter().map(|(x, m)| (x.clone(), m.clone() * c.clone())).collect(),
            density: self.density.as_ref().map(|g| DensityGrid {
                values: g.values.iter().map(|v| v * cf).collect(),
                ..g.clone()
            }),
        }
    }

    /// Atoms `(x, m)` with `|x| > tol` plus the density part.
    pub fn without_origin_atom(&self, tol: f64) -> Self {
        Measure {
            atoms: self
                .atoms
                .iter()
                .filter(|(x, _)| x.to_float().abs() > tol)
                .cloned()
                .collect(),
            density: self.density.clone(),
        }
    }

    pub fn to_f64(&self) -> Measure<f64> {
        Measure {
            atoms: self.atoms.iter().map(|(x, m)| (x.to_float(), m.to_float())).collect(),
            density: self.density.clone(),
        }
    }

    /// Smallest interval containing every atom and every non-zero density node.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (x, m) in &self.atoms {
            if !m.is_zero() {
                lo = lo.min(x.to_float());
                hi = hi.max(x.to_float());
            }
        }
        if let Some(g) = &self.density {
            for (j, v) in g.values.iter().enumerate() {
                if *v > 0.0 {
                    let left = if j > 0 { g.node(j - 1) } else { g.node(j) };
                    let right = if j < g.cells() { g.node(j + 1) } else { g.node(j) };
                    lo = lo.min(left);
                    hi = hi.max(right);
                }
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

impl Measure<f64> {
    pub fn from_json(text: &str) -> Result<Self, MeasureError> {
        let m: Measure<f64> =
            serde_json::from_str(text).map_err(|e| MeasureError::Json(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn from_json_value(value: &serde_json::Value) -> Result<Self, MeasureError> {
        let m: Measure<f64> = serde_json::from_value(value.clone())
            .map_err(|e| MeasureError::Json(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    /// `k`-th moment `∫ xᵏ dμ`.
    pub fn moment(&self, k: u32) -> f64 {
        self.integrate_atoms(|x| x.powi(k as i32))
            + self.integrate_density(|x| x.powi(k as i32), &[])
    }

    /// Image under `x ↦ s·x`.
    pub fn dilate(&self, s: f64) -> Self {
        if s == 0.0 {
            return Measure::point(0.0).scale(&self.total_mass());
        }
        let atoms = self.atoms.iter().map(|(x, m)| (s * x, *m)).collect();
        let density = self.density.as_ref().map(|g| {
            let values: Vec<f64> = if s > 0.0 {
                g.values.iter().map(|v| v / s).collect()
            } else {
                g.values.iter().rev().map(|v| v / -s).collect()
            };
            let (lo, hi) = if s > 0.0 { (s * g.lo, s * g.hi) } else { (s * g.hi, s * g.lo) };
            DensityGrid { lo, hi, h: g.h * s.abs(), values }
        });
        let mut m = Measure { atoms, density };
        m.merge_atoms();
        m
    }

    /// Image under `x ↦ x + c`.
    pub fn translate(&self, c: f64) -> Self {
        Measure {
            atoms: self.atoms.iter().map(|(x, m)| (x + c, *m)).collect(),
            density: self
                .density
                .as_ref()
                .map(|g| DensityGrid { lo: g.lo + c, hi: g.hi + c, ..g.clone() }),
        }
    }

    /// The semicircle law of variance `var` sampled on `cells` grid cells,
    /// rescaled so the interpolated density has unit mass.
    pub fn semicircle_density(var: f64, cells: usize) -> Self {
        let r = 2.0 * var.sqrt();
        let mut grid = DensityGrid::sample(-r, r, cells, |x| {
            (r * r - x * x).max(0.0).sqrt() * 2.0 / (std::f64::consts::PI * r * r)
        });
        let mass = grid.mass();
        grid.values.iter_mut().for_each(|v| *v /= mass);
        Measure::zero().with_density(grid)
    }

    /// Gauss quadrature for the semicircle law: `n` atoms reproducing its
    /// first `2n - 1` moments exactly (Chebyshev nodes of the second kind).
    pub fn semicircle_quadrature(var: f64, n: usize) -> Self {
        let r = 2.0 * var.sqrt();
        let atoms = (1..=n)
            .map(|j| {
                let theta = j as f64 * std::f64::consts::PI / (n + 1) as f64;
                (r * theta.cos(), 2.0 / (n + 1) as f64 * theta.sin().powi(2))
            })
            .collect();
        Measure::atomic(atoms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rational, rational_frac, Rational};

    #[test]
    fn json_field_names() {
        let m = Measure::atomic(vec![(1.0, 0.5), (-1.0, 0.5)])
            .with_density(DensityGrid { lo: 0.0, hi: 1.0, h: 0.5, values: vec![0.0, 1.0, 0.0] });
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(
            text,
            r#"{"atoms":[[-1.0,0.5],[1.0,0.5]],"grid":{"lo":0.0,"hi":1.0,"h":0.5,"values":[0.0,1.0,0.0]}}"#
        );
        assert_eq!(Measure::from_json(&text).unwrap(), m);
        assert_eq!(serde_json::to_string(&Measure::point(0.0)).unwrap(), r#"{"atoms":[[0.0,1.0]]}"#);
    }

    #[test]
    fn json_rejects_bad_grid() {
        let bad = r#"{"atoms":[],"grid":{"lo":0.0,"hi":1.0,"h":0.5,"values":[0.0,1.0]}}"#;
        assert!(matches!(Measure::from_json(bad), Err(MeasureError::GridShape { .. })));
        let neg = r#"{"atoms":[[0.0,-1.0]]}"#;
        assert!(matches!(Measure::from_json(neg), Err(MeasureError::BadValue { .. })));
    }

    #[test]
    fn merge_and_mass_exact() {
        let m: Measure<Rational> = Measure::atomic(vec![
            (rational(1), rational_frac(1, 3)),
            (rational(-1), rational_frac(1, 3)),
            (rational(1), rational_frac(1, 3)),
        ]);
        assert_eq!(m.atoms.len(), 2);
        assert_eq!(m.total_mass(), rational(1));
    }

    #[test]
    fn integrate_with_breaks_is_exact_for_indicator() {
        // uniform density on [0, 2]; ∫ 1{x > 1} = 1/2 despite the mid-cell jump
        let g = DensityGrid::sample(0.0, 2.0, 7, |_| 0.5);
        let v = g.integrate(|x| if x > 1.0 { 1.0 } else { 0.0 }, &[1.0]);
        assert!((v - 0.5).abs() < 1e-14);
        assert!((g.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn semicircle_constructions() {
        let q = Measure::semicircle_quadrature(1.0, 20);
        assert!((q.total_mass() - 1.0).abs() < 1e-14);
        assert!((q.moment(2) - 1.0).abs() < 1e-13);
        assert!((q.moment(4) - 2.0).abs() < 1e-13);
        let d = Measure::semicircle_density(1.0, 4000);
        assert!((d.total_mass() - 1.0).abs() < 1e-4);
        assert!((d.moment(2) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn dilate_and_translate() {
        assert_eq!(Measure::point(1.0).dilate(3.0), Measure::point(3.0));
        let d = Measure::semicircle_density(1.0, 2000).dilate(-2.0);
        assert!((d.moment(2) - 4.0).abs() < 1e-3);
        assert!((d.total_mass() - 1.0).abs() < 1e-2);
        let t = Measure::point(1.0).translate(0.5);
        assert_eq!(t, Measure::point(1.5));
    }
}
