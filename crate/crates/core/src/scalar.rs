//! Numeric abstractions.
//!
//! Flow quantities are carried as exact rationals ([`Exact`]) from parsing
//! through inventory aggregation so that conservation checks are exact.
//! Impact arithmetic switches to binary floating point; every impact type is
//! generic over a [`Scalar`] (`f32` or `f64`).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, NumAssign, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact decimal/rational amount.
pub type Exact = BigRational;

/// Anything an inventory can be accumulated in.
pub trait Amount: Clone + PartialOrd + Debug + Num + Neg<Output = Self> + Send + Sync + 'static {
    fn from_exact(value: &Exact) -> Self;
    fn as_f64(&self) -> f64;
    /// Decimal rendering used in reports.
    fn render(&self) -> String;
    /// `self * factor` in the scalar type, rounded once where possible.
    fn times<S: Scalar>(&self, factor: &Exact) -> S;
}

impl Amount for Exact {
    fn from_exact(value: &Exact) -> Self {
        value.clone()
    }

    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn render(&self) -> String {
        format_exact(self)
    }

    fn times<S: Scalar>(&self, factor: &Exact) -> S {
        S::from_exact(&(self * factor))
    }
}

impl Amount for f64 {
    fn from_exact(value: &Exact) -> Self {
        ToPrimitive::to_f64(value).unwrap_or(f64::NAN)
    }

    fn as_f64(&self) -> f64 {
        *self
    }

    fn render(&self) -> String {
        self.to_string()
    }

    fn times<S: Scalar>(&self, factor: &Exact) -> S {
        S::from_f64(self.as_f64() * factor.as_f64()).unwrap_or_else(S::nan)
    }
}

impl Amount for f32 {
    fn from_exact(value: &Exact) -> Self {
        ToPrimitive::to_f32(value).unwrap_or(f32::NAN)
    }

    fn as_f64(&self) -> f64 {
        f64::from(*self)
    }

    fn render(&self) -> String {
        self.to_string()
    }

    fn times<S: Scalar>(&self, factor: &Exact) -> S {
        S::from_f64(self.as_f64() * factor.as_f64()).unwrap_or_else(S::nan)
    }
}

/// Floating point type used for impact arithmetic: `f32` or `f64`.
pub trait Scalar: Amount + Float + FromPrimitive + NumAssign + Copy + Display + Default + Sum {}

impl<T> Scalar for T where T: Amount + Float + FromPrimitive + NumAssign + Copy + Display + Default + Sum {}

/// Relative closeness with a zero-safe scale: `|a - b| <= rel * max(|a|, |b|)`.
pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= rel * scale
}

/// Parse a decimal literal (`-12.5`, `1e-5`, `0.00001`) into an exact rational.
pub fn parse_decimal(text: &str) -> Result<Exact> {
    let bad = || Error::Schema(format!("invalid decimal literal {text:?}"));
    let s = text.trim();
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => (&body[..pos], Some(&body[pos + 1..])),
        None => (body, None),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let exp: i64 = match exponent {
        Some(e) => e.parse().map_err(|_| bad())?,
        None => 0,
    };
    if exp.abs() > 4096 {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer = BigInt::parse_bytes(digits.as_bytes(), 10).ok_or_else(bad)?;
    if negative {
        numer = -numer;
    }
    let scale = frac_part.len() as i64 - exp;
    let ten = BigInt::from(10u8);
    let value = if scale >= 0 {
        BigRational::new(numer, num_traits::pow(ten, scale as usize))
    } else {
        BigRational::from_integer(numer * num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Decimal as written in JSON: a string (preferred, exact) or a bare number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecimalText {
    Text(String),
    Number(serde_json::Number),
}

impl DecimalText {
    pub fn value(&self) -> Result<Exact> {
        match self {
            DecimalText::Text(s) => parse_decimal(s),
            DecimalText::Number(n) => parse_decimal(&n.to_string()),
        }
    }
}

impl From<&Exact> for DecimalText {
    fn from(value: &Exact) -> Self {
        DecimalText::Text(format_exact(value))
    }
}

/// Exact conversion of a finite float into a rational.
pub fn exact_from_f64(value: f64) -> Option<Exact> {
    BigRational::from_float(value)
}

/// Render an exact amount as a decimal string.
///
/// Terminating fractions are printed exactly; anything else falls back to the
/// shortest `f64` representation.
pub fn format_exact(value: &Exact) -> String {
    let denom = value.denom();
    let mut rest = denom.clone();
    let two = BigInt::from(2u8);
    let five = BigInt::from(5u8);
    let (mut twos, mut fives) = (0usize, 0usize);
    while rest.is_even() && !rest.is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{}", value.as_f64());
    }
    let places = twos.max(fives);
    let scaled = value.numer() * num_traits::pow(BigInt::from(10u8), places) / denom;
    let sign = if scaled.sign() == Sign::Minus { "-" } else { "" };
    let digits = scaled.abs().to_string();
    if places == 0 {
        return format!("{sign}{digits}");
    }
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (int, frac) = padded.split_at(padded.len() - places);
    format!("{sign}{int}.{frac}")
}
