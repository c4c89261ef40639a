//! # freevar
//!
//! Computational toolkit for higher variations of free Lévy processes.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`partitions`] | set, non-crossing and interval partitions, Kreweras complement, Möbius functions |
//! | [`cumulants`] | moment/free-cumulant conversion, τ_π, mixed free cumulants, Kreweras-route ⊠ |
//! | [`ncsym`] | exact polynomials in non-commuting variables: Q/P bases, letter expansion, ψₙ |
//! | [`transforms`] | Cauchy/Voiculescu transforms, ⊞ by subordination, ⊞-powers, Stieltjes inversion |
//! | [`levy`] | generating triples and pairs, pushforward Lévy measures, the variation triple map |
//! | [`rmt`] | GUE and free compound Poisson matrix models, Monte Carlo verification reports |
//!
//! Combinatorial routines are generic over [`Scalar`], implemented for `f64`
//! and for exact [`Rational`] numbers. Monte Carlo trials run through
//! [`exec::Exec`], which fans out over rayon when the `parallel` feature is on
//! and always aggregates in trial order, so reports are bit-identical across
//! thread counts.
//!
//! ```
//! use freevar::cumulants::{cumulants_to_moments, CumulantSequence};
//! use freevar::{rational, Rational};
//!
//! // Free Poisson with rate 1: every free cumulant equals 1, moments are Catalan numbers.
//! let kappa = CumulantSequence::new(vec![rational(1); 4]);
//! let m = cumulants_to_moments(&kappa).unwrap();
//! let expected: Vec<Rational> = [1, 2, 5, 14].iter().map(|&v| rational(v)).collect();
//! assert_eq!(m.values(), &expected[..]);
//! ```

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cumulants;
pub mod exec;
pub mod levy;
pub mod measure;
pub mod ncsym;
pub mod partitions;
pub mod rmt;
mod scalar;
pub mod transforms;

pub use scalar::{rational, rational_frac, Rational, Scalar};

/// Version string echoed into simulation reports.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));
