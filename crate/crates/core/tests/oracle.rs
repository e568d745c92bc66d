use std::fs::File;
use std::path::PathBuf;

use num_rational::BigRational;
use permswap::budget::{psa_budget, LowerBoundKind};
use permswap::data::{read_csv, tabulate, Dataset, RoleConfig};
use permswap::rational::{parse_rational, to_f64};
use permswap::verify::{applicable_lower_bounds, enumerate_universe, exact_psa_distribution, measured_optimal_epsilon};
use permswap::Epsilon;

fn fixture(name: &str) -> Dataset {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    read_csv(File::open(path).unwrap(), &RoleConfig::standard()).unwrap()
}

fn q(s: &str) -> BigRational {
    parse_rational(s).unwrap()
}

fn ln_odds(p: &BigRational) -> f64 {
    let p = to_f64(p);
    (p / (1.0 - p)).ln()
}

/// Optimal budget sits between every witnessed bound and the closed form.
fn sandwich(x: &Dataset, p: &str) -> (Epsilon, Vec<(LowerBoundKind, Epsilon)>) {
    let p = q(p);
    let u = enumerate_universe(x).unwrap();
    let t = tabulate(x);
    let optimal = measured_optimal_epsilon(&u, &p).unwrap().epsilon;
    let budget = psa_budget(to_f64(&p), permswap::data::max_stratum_b(x)).unwrap().epsilon;
    assert!(
        budget.is_infinite() || optimal.value() <= budget.value() + 1e-12,
        "optimal {optimal} above budget {budget}"
    );
    let bounds: Vec<_> = applicable_lower_bounds(&t, u.len(), &p)
        .into_iter()
        .map(|l| (l.kind, l.value))
        .collect();
    for (kind, v) in &bounds {
        assert!(
            optimal.is_infinite() || optimal.value() + 1e-12 >= v.value(),
            "{kind:?} bound {v} above optimal {optimal}"
        );
    }
    (optimal, bounds)
}

#[test]
fn swap_pair_is_tight_at_odds() {
    let x = fixture("swap-pair.csv");
    assert_eq!(enumerate_universe(&x).unwrap().len(), 2);
    for p in ["1/10", "1/3", "1/2", "7/10"] {
        let (optimal, bounds) = sandwich(&x, p);
        assert!((optimal.value() - ln_odds(&q(p)).abs()).abs() < 1e-12, "p = {p}");
        let has_ratio = bounds.iter().any(|(k, _)| *k == LowerBoundKind::DerangementRatio);
        assert_eq!(has_ratio, q(p) <= q("1/2"));
    }
}

#[test]
fn swap_pair_at_degenerate_rates() {
    let x = fixture("swap-pair.csv");
    for p in ["0", "1"] {
        let (optimal, bounds) = sandwich(&x, p);
        assert!(optimal.is_infinite());
        assert_eq!(bounds, vec![(LowerBoundKind::DegenerateRate, Epsilon::INFINITY)]);
        let u: Vec<_> = enumerate_universe(&x).unwrap().into_iter().collect();
        let a = exact_psa_distribution(&u[0].to_dataset(), &q(p)).unwrap();
        let b = exact_psa_distribution(&u[1].to_dataset(), &q(p)).unwrap();
        assert!(a.tables().is_disjoint(&b.tables()));
    }
}

#[test]
fn distinct_three_meets_odds_bound() {
    let x = fixture("distinct-three.csv");
    for p in ["1/10", "1/2", "4/5"] {
        let (optimal, bounds) = sandwich(&x, p);
        assert_eq!(bounds.iter().map(|b| b.0).collect::<Vec<_>>(), vec![LowerBoundKind::Odds]);
        assert!(optimal.value() >= ln_odds(&q(p)).abs() - 1e-12);
    }
}

#[test]
fn derangement_bound_attained_at_four() {
    let x = fixture("derangement-b4.csv");
    for p in ["1/10", "1/4", "1/2"] {
        let (optimal, bounds) = sandwich(&x, p);
        let ratio = bounds.iter().find(|b| b.0 == LowerBoundKind::DerangementRatio).unwrap().1;
        assert!((ratio.value() - (0.5 * 9f64.ln() - ln_odds(&q(p)))).abs() < 1e-12);
        assert!(optimal.value() >= ratio.value() - 1e-12);
    }
}

#[test]
fn derangement_bound_attained_at_six() {
    let x = fixture("derangement-b6.csv");
    let (optimal, bounds) = sandwich(&x, "1/5");
    let ratio = bounds.iter().find(|b| b.0 == LowerBoundKind::DerangementRatio).unwrap().1;
    assert!((ratio.value() - (0.5 * (265f64 / 9.0).ln() + 4f64.ln())).abs() < 1e-12);
    assert!(optimal.value() >= ratio.value() - 1e-12);
}
