//! Closed-form privacy-loss arithmetic for the swapping mechanism, plus the
//! zCDP accounting used for the census comparison.
//!
//! Everything here works in the log domain: only `ln(b + 1)` and the odds
//! `o = p / (1 − p)` are needed, so stratum bounds in the hundreds of
//! millions need no big-number arithmetic.

pub mod census;
mod derangement;
mod zcdp;

use std::fmt;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::{Epsilon, Error, Result};

pub use derangement::{
    derangement_count, derangement_count_alternating, derangement_table, log_derangement_ratio,
    EXACT_RATIO_LIMIT,
};
pub use zcdp::{compose_zcdp, group_privacy, zcdp_to_approx_dp, ZcdpBudget, CENSUS_DELTA};

/// Which branch of the budget formula produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// No stratum holds two distinct records.
    ZeroB,
    /// `0 < p <= p*`: `ε = ln(b + 1) − ln o`.
    LowP,
    /// `p* < p < 1`: `ε = ln o`.
    HighP,
    /// `p ∈ {0, 1}` with `b > 0`.
    Infinite,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::ZeroB => "zero-b",
            Regime::LowP => "low-p",
            Regime::HighP => "high-p",
            Regime::Infinite => "infinite",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetResult {
    pub epsilon: Epsilon,
    pub regime: Regime,
    pub p: f64,
    pub b: u64,
    /// `p / (1 − p)`; infinite at `p = 1`.
    pub odds: f64,
}

fn check_rate(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::param("p", format!("swap rate must lie in [0, 1], got {p}")))
    }
}

pub fn odds(p: f64) -> f64 {
    p / (1.0 - p)
}

/// The rate `√(b+1) / (√(b+1) + 1)` where both branches of the budget meet.
pub fn swap_rate_threshold(b: u64) -> f64 {
    let r = ((b + 1) as f64).sqrt();
    r / (r + 1.0)
}

/// Privacy-loss budget of the swapping mechanism for swap rate `p` and
/// stratum bound `b`. Ties at the threshold are reported as [`Regime::LowP`].
pub fn psa_budget(p: f64, b: u64) -> Result<BudgetResult> {
    check_rate(p)?;
    let o = odds(p);
    let (epsilon, regime) = if b == 0 {
        (Epsilon::ZERO, Regime::ZeroB)
    } else if p == 0.0 || p == 1.0 {
        (Epsilon::INFINITY, Regime::Infinite)
    } else if p <= swap_rate_threshold(b) {
        (Epsilon::finite(((b + 1) as f64).ln() - o.ln()), Regime::LowP)
    } else {
        (Epsilon::finite(o.ln()), Regime::HighP)
    };
    Ok(BudgetResult {
        epsilon,
        regime,
        p,
        b,
        odds: o,
    })
}

fn check_b(b: u64) -> Result<()> {
    if b < 2 {
        Err(Error::param("b", format!("needs b >= 2, got {b}")))
    } else {
        Ok(())
    }
}

/// Smallest attainable budget for a given `b`, and the rate attaining it:
/// `(ln(b+1)/2, √(b+1)/(√(b+1)+1))`.
pub fn min_budget(b: u64) -> Result<(f64, f64)> {
    check_b(b)?;
    Ok((((b + 1) as f64).ln() / 2.0, swap_rate_threshold(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapRates {
    pub low: f64,
    pub high: f64,
}

/// The two swap rates whose budget equals `epsilon`, one per branch.
/// `None` when `epsilon` is below [`min_budget`].
pub fn swap_rates_for_budget(epsilon: f64, b: u64) -> Result<Option<SwapRates>> {
    check_b(b)?;
    let (min, _) = min_budget(b)?;
    if epsilon.is_nan() || epsilon < min {
        return Ok(None);
    }
    let rate = |o: f64| if o.is_infinite() { 1.0 } else { o / (1.0 + o) };
    let low = rate((((b + 1) as f64).ln() - epsilon).exp());
    let high = rate(epsilon.exp());
    Ok(Some(SwapRates { low, high }))
}

/// Which lower-bound construction a value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerBoundKind {
    /// `p ∈ {0, 1}`: no finite budget exists.
    DegenerateRate,
    /// `ε ≥ ln o`.
    Odds,
    /// `ε ≥ ½ ln[d(b)/d(b−2)] − ln o`.
    DerangementRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub kind: LowerBoundKind,
    pub value: Epsilon,
    /// Condition on the domain (and rate) under which some universe attains it.
    pub requires: &'static str,
}

/// Lower bounds that any valid budget must respect.
///
/// Each bound is witnessed by a universe whose largest mixed stratum has
/// size `b`, so for `b = 0` the list is empty. The derangement-ratio bound
/// needs `b = 2` (with `p <= 1/2`) or `b >= 4`; `b = 3` has no witness.
pub fn psa_lower_bounds(p: f64, b: u64) -> Result<Vec<LowerBound>> {
    check_rate(p)?;
    if b < 2 {
        return Ok(Vec::new());
    }
    if p == 0.0 || p == 1.0 {
        return Ok(vec![LowerBound {
            kind: LowerBoundKind::DegenerateRate,
            value: Epsilon::INFINITY,
            requires: "|H|, |S| >= 2",
        }]);
    }
    let ln_o = odds(p).ln();
    let mut out = vec![LowerBound {
        kind: LowerBoundKind::Odds,
        value: Epsilon::finite(ln_o),
        requires: "|H|, |S| >= 2",
    }];
    let ratio_bound = |requires| LowerBound {
        kind: LowerBoundKind::DerangementRatio,
        value: Epsilon::finite(0.5 * log_derangement_ratio(b).unwrap() - ln_o),
        requires,
    };
    if b == 2 && p <= 0.5 {
        out.push(ratio_bound("|H|, |S| >= 2 and p <= 1/2"));
    } else if b >= 4 {
        out.push(ratio_bound("|H|, |S| >= 4"));
    }
    Ok(out)
}

fn factorial_u64(k: u64) -> BigUint {
    (1..=k).fold(BigUint::from(1u32), |acc, j| acc * BigUint::from(j))
}

/// `e / (2·k!)`: exact factorial below 25, log domain above.
fn half_e_over_factorial(k: u64) -> f64 {
    if k < 25 {
        std::f64::consts::E / (2.0 * factorial_u64(k).to_f64().unwrap())
    } else {
        let ln_fact: f64 = (2..=k).map(|j| (j as f64).ln()).sum();
        (1.0 - std::f64::consts::LN_2 - ln_fact).exp()
    }
}

/// Gap between the closed-form budget and the best possible one:
/// `½ ln[ (b+1)²/(b(b−1)) · (1 + e/(2(b−2)!)) / (1 − e/(2b!)) ]`.
pub fn optimality_gap_f(b: u64) -> Result<f64> {
    check_b(b)?;
    let bf = b as f64;
    // (b+1)^2 / (b(b-1)) = 1 + (3b+1)/(b(b-1))
    let first = ((3.0 * bf + 1.0) / (bf * (bf - 1.0))).ln_1p();
    let numer = half_e_over_factorial(b - 2).ln_1p();
    let denom = (-half_e_over_factorial(b)).ln_1p();
    Ok(0.5 * (first + numer - denom))
}
