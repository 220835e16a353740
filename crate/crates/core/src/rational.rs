//! Exact rational helpers shared by the model, the document format and the CLI.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal {0:?} (expected \"num/den\" or an integer)")]
pub struct ParseRationalError(pub String);

/// Parses `"num/den"` or a plain integer. The denominator must be positive.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let trimmed = text.trim();
    match trimmed.split_once('/') {
        Some((num, den)) => {
            let num: BigInt = num.trim().parse().map_err(|_| err())?;
            let den: BigInt = den.trim().parse().map_err(|_| err())?;
            if !den.is_positive() {
                return Err(err());
            }
            Ok(Rational::new(num, den))
        }
        None => {
            let num: BigInt = trimmed.parse().map_err(|_| err())?;
            Ok(Rational::from_integer(num))
        }
    }
}

/// Always `num/den`, in lowest terms, e.g. `2/3`, `1/1`, `-5/2`, `0/1`.
pub fn format_rational(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Bits needed for numerator plus denominator.
pub fn bit_size(value: &Rational) -> u64 {
    value.numer().bits() + value.denom().bits()
}
