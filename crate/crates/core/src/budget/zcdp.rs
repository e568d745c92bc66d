use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The `δ` used for every census conversion.
pub const CENSUS_DELTA: f64 = 1e-10;

/// A zCDP budget reported as `ρ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZcdpBudget {
    pub rho_squared: f64,
    pub label: String,
}

impl ZcdpBudget {
    pub fn new(label: impl Into<String>, rho_squared: f64) -> Result<Self> {
        if !rho_squared.is_finite() || rho_squared < 0.0 {
            return Err(Error::param("rho_squared", format!("must be finite and >= 0, got {rho_squared}")));
        }
        Ok(ZcdpBudget {
            rho_squared,
            label: label.into(),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho_squared.sqrt()
    }

    pub fn to_approx_dp(&self, delta: f64) -> Result<f64> {
        zcdp_to_approx_dp(self.rho_squared, delta)
    }
}

/// `ε = ρ² + 2ρ√(−ln δ)`.
pub fn zcdp_to_approx_dp(rho_squared: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
    }
    if rho_squared.is_nan() || rho_squared < 0.0 {
        return Err(Error::param("rho_squared", format!("must be >= 0, got {rho_squared}")));
    }
    let rho = rho_squared.sqrt();
    Ok(rho_squared + 2.0 * rho * (-delta.ln()).sqrt())
}

/// Sequential composition: the `ρ²` values add.
pub fn compose_zcdp(budgets: &[ZcdpBudget]) -> ZcdpBudget {
    let label = budgets
        .iter()
        .map(|b| b.label.as_str())
        .collect::<Vec<_>>()
        .join(" + ");
    ZcdpBudget {
        rho_squared: budgets.iter().map(|b| b.rho_squared).sum(),
        label,
    }
}

/// Budget against a unit that may appear `copies` times: `ρ` scales by
/// `copies`, so `ρ²` scales by `copies²`.
pub fn group_privacy(budget: &ZcdpBudget, copies: u32) -> ZcdpBudget {
    let k = f64::from(copies);
    ZcdpBudget {
        rho_squared: budget.rho_squared * k * k,
        label: format!("{} (x{copies} group)", budget.label),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(v: f64) -> ZcdpBudget {
        ZcdpBudget::new("t", v).unwrap()
    }

    #[test]
    fn conversion_zero() {
        assert_eq!(zcdp_to_approx_dp(0.0, CENSUS_DELTA).unwrap(), 0.0);
    }

    #[test]
    fn conversion_matches_hand_value() {
        // rho = 1.6, sqrt(ln 1e10) = 4.798525...
        let eps = zcdp_to_approx_dp(2.56, CENSUS_DELTA).unwrap();
        assert!((eps - (2.56 + 3.2 * (10f64.ln() * 10.0).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn bad_delta() {
        assert!(zcdp_to_approx_dp(1.0, 0.0).is_err());
        assert!(zcdp_to_approx_dp(1.0, 1.0).is_err());
        assert!(ZcdpBudget::new("x", -1.0).is_err());
    }

    #[test]
    fn composition_examples() {
        assert!((compose_zcdp(&[b(0.07), b(2.56)]).rho_squared - 2.63).abs() < 1e-12);
        assert!((compose_zcdp(&[b(7.70), b(4.96), b(2.63)]).rho_squared - 15.29).abs() < 1e-12);
        let overall = compose_zcdp(&[b(15.29), b(19.776), b(17.79), b(2.515)]);
        assert!((overall.rho_squared - 55.371).abs() < 1e-12);
        assert!((group_privacy(&b(55.37), 2).rho_squared - 221.48).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn composition_commutes_and_associates(xs in proptest::collection::vec(0.0f64..100.0, 0..8)) {
            let budgets: Vec<_> = xs.iter().map(|&v| b(v)).collect();
            let mut rev = budgets.clone();
            rev.reverse();
            let whole = compose_zcdp(&budgets).rho_squared;
            prop_assert!((whole - compose_zcdp(&rev).rho_squared).abs() < 1e-12);
            let mid = budgets.len() / 2;
            let nested = compose_zcdp(&[compose_zcdp(&budgets[..mid]), compose_zcdp(&budgets[mid..])]);
            prop_assert!((whole - nested.rho_squared).abs() < 1e-12);
        }
    }
}
