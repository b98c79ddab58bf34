//! Exact rational arithmetic helpers shared across the solver.
//!
//! All core-solver probabilities are `BigRational`; floats appear only in the
//! closed-form left-censored module. Rationals serialize as `"num/den"`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RationalParseError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Builds a rational from small integer parts. Panics on zero denominator.
pub fn rational(num: i64, den: i64) -> Rational {
    assert!(den != 0, "zero denominator");
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"num/den"` or a bare integer.
pub fn parse_rational(s: &str) -> Result<Rational, RationalParseError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(RationalParseError::Empty);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| RationalParseError::Invalid(s.to_string()))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| RationalParseError::Invalid(s.to_string()))?;
    if den.is_zero() {
        return Err(RationalParseError::ZeroDenominator(s.to_string()));
    }
    Ok(Rational::new(num, den))
}

/// Canonical `"num/den"` form: reduced, positive denominator, explicit `/1`.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn to_f64(r: &Rational) -> f64 {
    // BigRational::to_f64 handles magnitudes beyond f64 by scaling.
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}
