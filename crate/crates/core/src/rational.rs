//! Exact rational helpers shared by the oracle and the per-stratum
//! probability formula.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// Parse `"0.3"`, `"3/10"`, `"1"` or `"1e-2"`-free decimals into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    let bad = || Error::param("rational", format!("cannot parse `{text}` as an exact rational"));
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    let r = BigRational::new(numer, denom);
    Ok(if neg { -r } else { r })
}

/// Exact rational of the shortest decimal that round-trips to `x`, so that
/// `0.1` becomes `1/10` rather than the nearest binary fraction.
pub fn from_decimal_f64(x: f64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::param("rational", format!("{x} is not finite")));
    }
    parse_rational(&format!("{x}"))
}

/// Natural log of a positive big integer without overflowing `f64`.
pub fn ln_bigint(n: &BigInt) -> f64 {
    assert!(n.sign() == Sign::Plus, "logarithm of a non-positive integer");
    let bits = n.bits();
    if bits <= 1000 {
        n.to_f64().expect("fits in f64").ln()
    } else {
        let shift = bits - 64;
        let top = (n >> shift).to_f64().expect("64 bit mantissa fits");
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// Natural log of a positive rational; the only inexact step in the oracle.
pub fn ln_rational(r: &BigRational) -> f64 {
    assert!(r.is_positive(), "logarithm of a non-positive rational");
    ln_bigint(r.numer()) - ln_bigint(r.denom())
}

pub fn pow(base: &BigRational, exp: usize) -> BigRational {
    num_traits::pow(base.clone(), exp)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| r.numer().to_f64().unwrap() / r.denom().to_f64().unwrap())
}

/// Whether `0 <= r <= 1`.
pub fn is_unit_interval(r: &BigRational) -> bool {
    !r.is_negative() && r <= &BigRational::one()
}
