use std::collections::BTreeMap;

use permswap::data::{swap_invariants, tabulate, ContingencyTable, Dataset, Domain, Record};
use permswap::psa::{run_psa, run_psa_detailed, PsaParams};
use permswap::rational::{from_decimal_f64, to_f64};
use permswap::verify::exact_psa_distribution;
use proptest::prelude::*;

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (1usize..4, 1usize..4, 1usize..4).prop_flat_map(|(m, h, s)| {
        proptest::collection::vec((0..m, 0..h, 0..s), 0..40).prop_map(move |triples| {
            let records = triples.into_iter().map(Record::from).collect();
            Dataset::new(Domain::new(m, h, s), records).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn invariants_and_margins_survive(x in dataset_strategy(), p in 0.0f64..=1.0, seed in any::<u64>()) {
        let out = run_psa_detailed(&x, &PsaParams::new(p, seed).unwrap());
        prop_assert_eq!(out.table.invariants(), swap_invariants(&x));
        prop_assert_eq!(out.table.one_way_margins(), tabulate(&x).one_way_margins());
        prop_assert_eq!(out.table.total(), x.len() as u64);
        prop_assert_ne!(out.permutation.derange_count(), 1);
        prop_assert!(out.diagnostics.changed <= out.diagnostics.selected);
    }

    #[test]
    fn same_seed_same_output(x in dataset_strategy(), p in 0.0f64..=1.0, seed in any::<u64>()) {
        let params = PsaParams::new(p, seed).unwrap();
        prop_assert_eq!(run_psa(&x, &params), run_psa(&x, &params));
    }

    #[test]
    fn record_order_is_unobservable_in_law(seed in any::<u64>(), rot in 0usize..5) {
        // The sampled table depends on positions, but the output law must not.
        let d = Domain::new(1, 3, 2);
        let x = Dataset::from_triples(d, &[(0, 0, 0), (0, 1, 1), (0, 2, 1), (0, 0, 1), (0, 2, 0)]);
        let order: Vec<usize> = (0..5).map(|i| (i + rot) % 5).collect();
        let y = x.reordered(&order);
        let p = from_decimal_f64(0.35).unwrap();
        prop_assert_eq!(exact_psa_distribution(&x, &p).unwrap(), exact_psa_distribution(&y, &p).unwrap());
        let params = PsaParams::new(0.35, seed).unwrap();
        prop_assert_eq!(run_psa(&y, &params).invariants(), swap_invariants(&x));
    }
}

#[test]
fn zero_rate_returns_input() {
    let d = Domain::new(3, 2, 3);
    let x = Dataset::from_triples(d, &[(0, 0, 0), (0, 1, 2), (1, 1, 1), (1, 0, 2), (2, 1, 0)]);
    for seed in 0..20 {
        assert_eq!(run_psa(&x, &PsaParams::new(0.0, seed).unwrap()), tabulate(&x));
    }
}

#[test]
fn invalid_rates_rejected() {
    assert!(PsaParams::new(-0.1, 0).is_err());
    assert!(PsaParams::new(1.1, 0).is_err());
    assert!(PsaParams::new(f64::NAN, 0).is_err());
}

#[test]
fn order_shuffle_metamorphic_frequencies() {
    let d = Domain::new(1, 2, 2);
    let x = Dataset::from_triples(d, &[(0, 0, 0), (0, 1, 1), (0, 1, 0)]);
    let y = x.reordered(&[2, 0, 1]);
    let runs = 20_000u64;
    let freq = |z: &Dataset| {
        let mut c: BTreeMap<ContingencyTable, u64> = BTreeMap::new();
        for seed in 0..runs {
            *c.entry(run_psa(z, &PsaParams::new(0.5, seed).unwrap())).or_default() += 1;
        }
        c
    };
    let (a, b) = (freq(&x), freq(&y));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (t, &ca) in &a {
        let (fa, fb) = (ca as f64 / runs as f64, b[t] as f64 / runs as f64);
        let sd = (2.0 * fa * (1.0 - fa) / runs as f64).sqrt();
        assert!((fa - fb).abs() <= 4.0 * sd, "table {t}: {fa} vs {fb}");
    }
}

/// Empirical frequencies over 10^5 seeds fall inside 3-sigma binomial bands
/// around the exact law.
fn frequency_check(x: &Dataset, p: f64) {
    let law = exact_psa_distribution(x, &from_decimal_f64(p).unwrap()).unwrap();
    let runs = 100_000u64;
    let mut counts: BTreeMap<ContingencyTable, u64> = BTreeMap::new();
    for seed in 0..runs {
        *counts.entry(run_psa(x, &PsaParams::new(p, seed).unwrap())).or_default() += 1;
    }
    for t in counts.keys() {
        assert!(law.support().contains_key(t), "sampled table {t} outside the exact support");
    }
    for (t, prob) in law.support() {
        let pe = to_f64(prob);
        let f = *counts.get(t).unwrap_or(&0) as f64 / runs as f64;
        let sd = (pe * (1.0 - pe) / runs as f64).sqrt();
        assert!((f - pe).abs() <= 3.0 * sd, "table {t}: frequency {f}, exact {pe}");
    }
}

#[test]
fn frequencies_match_exact_law_two_records() {
    let d = Domain::new(1, 2, 2);
    frequency_check(&Dataset::from_triples(d, &[(0, 0, 0), (0, 1, 1)]), 0.5);
    frequency_check(&Dataset::from_triples(d, &[(0, 0, 0), (0, 1, 1)]), 1.0 / 3.0);
}

#[test]
fn frequencies_match_exact_law_three_records() {
    let d = Domain::new(1, 3, 3);
    frequency_check(&Dataset::from_triples(d, &[(0, 0, 0), (0, 1, 1), (0, 2, 2)]), 0.3);
    let d = Domain::new(2, 2, 2);
    frequency_check(&Dataset::from_triples(d, &[(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0), (1, 1, 1)]), 0.6);
}
