use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Exact rational numbers with arbitrary-precision numerator and denominator.
pub type Rational = BigRational;

/// Shorthand for an integer-valued [`Rational`].
pub fn rational(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Shorthand for `num / den` as a [`Rational`].
pub fn rational_frac(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// The numeric tower shared by the combinatorial and Lévy-calculus routines.
///
/// `f64` is the fast approximate mode; [`Rational`] is the exact mode used by
/// the identity checks.
pub trait Scalar:
    Clone + Debug + PartialEq + PartialOrd + Num + Signed + Send + Sync + 'static
{
    fn from_i64(v: i64) -> Self;
    /// Conversion of a float into the tower. Exact for rationals (binary expansion).
    fn from_float(v: f64) -> Self;
    fn to_float(&self) -> f64;
    /// `false` only for NaN or infinite floats.
    fn is_finite_value(&self) -> bool;
    /// Whether arithmetic in this tower is exact.
    const EXACT: bool;
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_float(v: f64) -> Self {
        v
    }
    fn to_float(&self) -> f64 {
        *self
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
    const EXACT: bool = false;
}

impl Scalar for Rational {
    fn from_i64(v: i64) -> Self {
        rational(v)
    }
    fn from_float(v: f64) -> Self {
        <Rational as FromPrimitive>::from_f64(v).expect("non-finite float cannot be represented as a rational")
    }
    fn to_float(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_finite_value(&self) -> bool {
        true
    }
    const EXACT: bool = true;
}

/// Integer power by repeated squaring, valid for any [`Scalar`].
pub(crate) fn powi<S: Scalar>(base: &S, exp: u32) -> S {
    let mut result = S::one();
    let mut b = base.clone();
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            result = result * b.clone();
        }
        b = b.clone() * b;
        e >>= 1;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_from_float_is_exact() {
        let r = <Rational as Scalar>::from_float(0.375);
        assert_eq!(r, rational_frac(3, 8));
    }

    #[test]
    fn powi_matches_repeated_product() {
        assert_eq!(powi(&rational_frac(2, 3), 5), rational_frac(32, 243));
        assert_eq!(powi(&1.5f64, 0), 1.0);
    }
}
