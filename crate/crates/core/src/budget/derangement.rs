use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::rational::ln_bigint;
use crate::{Error, Result};

/// Largest `b` for which [`log_derangement_ratio`] uses exact big integers.
pub const EXACT_RATIO_LIMIT: u64 = 25;

/// `d(k)`, the number of fixed-point-free permutations of `k` elements,
/// via `d(k) = k·d(k−1) + (−1)^k` with `d(0) = 1`.
pub fn derangement_count(k: u64) -> BigUint {
    let mut d = BigInt::one();
    for j in 1..=k {
        d = d * BigInt::from(j) + if j % 2 == 0 { BigInt::one() } else { -BigInt::one() };
    }
    d.to_biguint().expect("derangement numbers are non-negative")
}

/// `d(0), ..., d(k)` in one pass.
pub fn derangement_table(k: usize) -> Vec<BigUint> {
    let mut out = Vec::with_capacity(k + 1);
    let mut d = BigInt::one();
    out.push(BigUint::one());
    for j in 1..=k as u64 {
        d = d * BigInt::from(j) + if j % 2 == 0 { BigInt::one() } else { -BigInt::one() };
        out.push(d.to_biguint().unwrap());
    }
    out
}

/// `k! · Σ_{j=0}^{k} (−1)^j / j!`, evaluated exactly. Independent of the
/// recurrence; kept for cross-checking.
pub fn derangement_count_alternating(k: u64) -> BigUint {
    let mut factorial = BigInt::one();
    for j in 1..=k {
        factorial *= BigInt::from(j);
    }
    let mut sum = BigRational::zero();
    let mut jfact = BigInt::one();
    for j in 0..=k {
        if j > 0 {
            jfact *= BigInt::from(j);
        }
        let term = BigRational::new(BigInt::one(), jfact.clone());
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let total = sum * BigRational::from_integer(factorial);
    assert!(total.is_integer());
    total.to_integer().to_biguint().unwrap()
}

/// `ln[d(b) / d(b−2)]`.
///
/// Exact for `b <= 25`. Above that, `ln[b(b−1)]`: the true ratio is
/// `b(b−1) − (−1)^b (b−1)/d(b−2)`, so the relative error is below `10⁻²⁰`.
/// At `b = 3` the ratio is `2/0` and the result is infinite.
pub fn log_derangement_ratio(b: u64) -> Result<f64> {
    if b < 2 {
        return Err(Error::param("b", format!("derangement ratio needs b >= 2, got {b}")));
    }
    if b <= EXACT_RATIO_LIMIT {
        let num = derangement_count(b);
        let den = derangement_count(b - 2);
        if den.is_zero() {
            return Ok(f64::INFINITY);
        }
        Ok(ln_bigint(&BigInt::from(num)) - ln_bigint(&BigInt::from(den)))
    } else {
        let b = b as f64;
        Ok(b.ln() + (b - 1.0).ln())
    }
}
