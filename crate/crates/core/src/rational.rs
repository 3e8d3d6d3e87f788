//! Exact rational scalars.
//!
//! Every time, rate and amount of data in the crate is a [`Q`]. Text forms
//! are `p/q`, a plain integer, or a finite decimal such as `1.5`, which is
//! converted exactly.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Arbitrary-precision rational number.
pub type Q = BigRational;

/// `n/d` as an exact rational. Panics if `d == 0`.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// The integer `n` as a rational.
pub fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn zero() -> Q {
    Q::zero()
}

/// Lossy conversion for display purposes.
pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Positive part `max(x, 0)`.
pub fn pos(x: Q) -> Q {
    if x.is_negative() {
        Q::zero()
    } else {
        x
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational `{input}`: {reason}")]
pub struct ParseRationalError {
    pub input: String,
    pub reason: &'static str,
}

fn bad(input: &str, reason: &'static str) -> ParseRationalError {
    ParseRationalError {
        input: input.to_string(),
        reason,
    }
}

fn parse_int(s: &str, whole: &str) -> Result<BigInt, ParseRationalError> {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad(whole, "expected digits"));
    }
    s.parse::<BigInt>()
        .map_err(|_| bad(whole, "expected digits"))
}

/// Parses `p/q`, `p`, or a finite decimal like `-0.125`.
pub fn parse_rational(input: &str) -> Result<Q, ParseRationalError> {
    let s = input.trim();
    if s.is_empty() {
        return Err(bad(input, "empty"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_int(num.trim(), input)?;
        let d = parse_int(den.trim(), input)?;
        if d.is_zero() {
            return Err(bad(input, "zero denominator"));
        }
        return Ok(Q::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad(input, "malformed decimal"));
        }
        let negative = whole.starts_with('-');
        let whole = if whole.is_empty() || whole == "-" || whole == "+" {
            BigInt::zero()
        } else {
            parse_int(whole, input)?
        };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_num: BigInt = frac.parse().map_err(|_| bad(input, "malformed decimal"))?;
        let magnitude = Q::from_integer(whole.abs()) + Q::new(frac_num, scale);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    Ok(Q::from_integer(parse_int(s, input)?))
}

/// Formats as `p/q` (or `p` when integral).
pub struct Exact<'a>(pub &'a Q);

impl fmt::Display for Exact<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn fmt_q(x: &Q) -> String {
    Exact(x).to_string()
}
