//! One PASS/FAIL line per acceptance criterion, with its sub-checks listed
//! beneath it. Exits non-zero when a criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigUint;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use permswap::budget::census::census2020_report;
use permswap::budget::{
    derangement_count, derangement_count_alternating, min_budget, optimality_gap_f, psa_budget, swap_rates_for_budget,
};
use permswap::data::{swap_invariants, table_hamming, tabulate, ContingencyTable, Dataset, Domain};
use permswap::psa::{run_psa, run_psa_detailed, Permutation, PsaParams};
use permswap::rational::parse_rational;
use permswap::synth::{synthesize, StratumShape, StratumSpec, SynthSpec};
use permswap::utility::utility_experiment;
use permswap::verify::{
    all_tables, connecting_permutation, connects, exact_psa_distribution, exhaustive_sweep, group_by_universe,
    mult_distance, mult_distance_ratio, SweepConfig, SweepReport,
};

#[derive(Default)]
struct Criterion {
    checks: Vec<(bool, String)>,
}

impl Criterion {
    fn check(&mut self, pass: bool, what: impl Into<String>) {
        self.checks.push((pass, what.into()));
    }

    fn near(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, format!("{label}: got {got:.6}, want {want} ± {tol}"));
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.0)
    }
}

fn q(s: &str) -> BigRational {
    parse_rational(s).unwrap()
}

fn large_stratum_budgets() -> Criterion {
    let mut c = Criterion::default();
    for (p, want) in [(0.01, 17.08), (0.05, 15.43), (0.10, 14.68), (0.50, 12.48)] {
        let got = psa_budget(p, 264_331).unwrap().epsilon.value();
        c.near(&format!("b = 264331, p = {p}"), got, want, 0.005);
    }
    c
}

fn census_counterfactuals() -> Criterion {
    let mut c = Criterion::default();
    let rows = [
        (13_475_623u64, 19.36, 16.42),
        (3_948_028, 18.13, 15.19),
        (3_420_628, 17.99, 15.05),
        (939_185, 16.70, 13.75),
        (6_204, 11.68, 8.73),
        (4_549, 11.37, 8.42),
    ];
    let report = census2020_report();
    for ((b, low, high), row) in rows.iter().zip(&report.psa) {
        c.check(row.b == *b, format!("shipped stratum b = {} matches {b}", row.b));
        c.near(&format!("b = {b}, p = 0.05"), psa_budget(0.05, *b).unwrap().epsilon.value(), *low, 0.01);
        c.near(&format!("b = {b}, p = 0.50"), psa_budget(0.50, *b).unwrap().epsilon.value(), *high, 0.01);
    }
    c
}

fn min_budget_analysis() -> Criterion {
    let mut c = Criterion::default();
    let (e, p) = min_budget(10).unwrap();
    c.near("min budget b = 10", e, 1.20, 0.005);
    c.near("argmin rate b = 10", p, 0.768, 0.001);
    let (e, p) = min_budget(1_000_000).unwrap();
    c.near("min budget b = 1e6", e, 6.91, 0.005);
    c.near("argmin rate b = 1e6", p, 0.999, 0.001);
    match swap_rates_for_budget(3.0, 10).unwrap() {
        Some(r) => {
            c.near("low rate for epsilon 3, b = 10", r.low, 0.354, 0.001);
            c.near("high rate for epsilon 3, b = 10", r.high, 0.952, 0.001);
        }
        None => c.check(false, "swap rates for epsilon 3, b = 10 exist"),
    }
    c
}

fn census_conversions() -> Criterion {
    let mut c = Criterion::default();
    let r = census2020_report();
    for (key, rho, want) in [
        ("pl-person", 2.56, 17.90),
        ("dhc-household", 7.70, 34.33),
        ("dhc-person", 4.96, 26.34),
    ] {
        let got = r.product(key).unwrap().epsilon;
        c.near(&format!("rho^2 {rho} -> epsilon"), got, want, 0.01);
    }
    let pl_household = r.product("pl-household").unwrap();
    c.near("rho^2 0.07 -> epsilon (relaxed)", pl_household.epsilon, 2.70, 0.10);
    c.check(pl_household.note.is_some(), "rho^2 0.07 row carries a discrepancy note");
    let tda = r.composite("TopDown total").unwrap();
    c.near("TopDown total rho^2", tda.rho_squared, 15.29, 1e-9);
    c.near("rho^2 15.29 -> epsilon", tda.epsilon, 52.83, 0.01);
    c.near("PL composition 0.07 + 2.56", r.composite("PL file").unwrap().rho_squared, 2.63, 1e-9);
    let overall = r.composite("Overall 2020 DAS").unwrap();
    c.near("overall composition", overall.rho_squared, 55.371, 1e-9);
    c.near("overall epsilon", overall.epsilon, 126.78, 0.02);
    let doubled = r.composite("Overall 2020 DAS, one duplicated").unwrap();
    c.near("doubled group rho^2", doubled.rho_squared, 221.48, 0.01);
    c.near("doubled group epsilon", doubled.epsilon, 364.31, 0.05);
    c
}

fn gap_function() -> Criterion {
    let mut c = Criterion::default();
    let f10 = optimality_gap_f(10).unwrap();
    // The stated 0.148 is a three-decimal figure; f(10) = 0.1480075.
    c.check(
        (f10 * 1000.0).round() / 1000.0 <= 0.148,
        format!("f(10) = {f10:.7} <= 0.148 at three decimals"),
    );
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    let mut samples = Vec::new();
    let mut b = 2u64;
    while b <= 1_000_000 {
        samples.push(b);
        b = if b < 100 { b + 1 } else { b + b / 7 };
    }
    samples.push(1_000_000);
    for &b in &samples {
        let f = optimality_gap_f(b).unwrap();
        monotone &= f > 0.0 && f < prev;
        prev = f;
    }
    c.check(monotone, format!("f positive and strictly decreasing on {} sampled b in [2, 1e6]", samples.len()));
    c.check(prev < 1e-5, format!("f(1e6) = {prev:.3e} < 1e-5"));
    c
}

fn derangement_suite() -> Criterion {
    let mut c = Criterion::default();
    let agree = (0..=20).all(|k| derangement_count(k) == derangement_count_alternating(k));
    c.check(agree, "recurrence equals alternating sum for k <= 20");
    let mut violations = 0;
    let mut checked = 0;
    for k in 0..=30u64 {
        let dk = derangement_count(k);
        for a in 0..=k {
            let d = derangement_count(k - a);
            if d == BigUint::from(0u32) {
                continue;
            }
            checked += 1;
            if dk > BigUint::from(k + 1).pow(a as u32) * d {
                violations += 1;
            }
        }
    }
    c.check(violations == 0, format!("d(k)/d(k-a) <= (k+1)^a on {checked} pairs, {violations} violations"));
    c
}

fn rates() -> Vec<BigRational> {
    ["1/10", "3/10", "1/2", "7/10", "9/10"].iter().map(|s| q(s)).collect()
}

fn soundness_sweep(report: &SweepReport) -> Criterion {
    let mut c = Criterion::default();
    c.check(
        report.datasets == 495,
        format!(
            "{} datasets with at most 4 records in {} universes, {} ordered pairs",
            report.datasets, report.universes, report.ordered_pairs
        ),
    );
    c.check(
        report.count("dp") == 0,
        format!("{} of {} pair checks within budget × d_Ham", report.dp_checks - report.count("dp"), report.dp_checks),
    );
    c.check(
        report.count("lower-bound") == 0,
        format!("{} witnessed lower bounds met by the optimal budget", report.lower_bound_checks),
    );
    c.check(report.count("support") == 0, "every output support equals its universe");
    c.check(report.count("universe") == 0, "universe enumeration agrees with invariant grouping");
    for f in report.failures.iter().filter(|f| f.check != "connecting").take(5) {
        c.check(false, format!("{}: {} vs {:?} at p = {}: {}", f.check, f.x, f.x_prime, f.p, f.detail));
    }
    c
}

fn tightness() -> Criterion {
    let mut c = Criterion::default();
    let d = Domain::new(1, 2, 2);
    let x = Dataset::from_triples(d, &[(0, 0, 0), (0, 1, 1)]);
    let y = Dataset::from_triples(d, &[(0, 0, 1), (0, 1, 0)]);
    for p in ["1/10", "1/3", "1/2"] {
        let p = q(p);
        let px = exact_psa_distribution(&x, &p).unwrap();
        let py = exact_psa_distribution(&y, &p).unwrap();
        let one = BigRational::from_integer(1.into());
        let inv_odds = (&one - &p) / &p;
        let expected = if inv_odds >= one { &inv_odds * &inv_odds } else { (&one / &inv_odds).pow(2) };
        let ratio = mult_distance_ratio(&px, &py).map(|r| r.0);
        c.check(ratio.as_ref() == Some(&expected), format!("p = {p}: exact ratio equals o^-2 = {expected}"));
        let per_unit = mult_distance(&px, &py).value() / 2.0;
        let pf = permswap::rational::to_f64(&p);
        c.near(&format!("p = {p}: per-unit epsilon vs |ln o|"), per_unit, (pf / (1.0 - pf)).ln().abs(), 1e-12);
    }
    for p in ["0", "1"] {
        let px = exact_psa_distribution(&x, &q(p)).unwrap();
        let py = exact_psa_distribution(&y, &q(p)).unwrap();
        c.check(
            px.tables().is_disjoint(&py.tables()) && mult_distance(&px, &py).is_infinite(),
            format!("p = {p}: supports disjoint, distance infinite"),
        );
    }
    c
}

/// Fewest moved records over every permutation taking `x` to `target`.
fn brute_force_moves(x: &Dataset, target: &ContingencyTable) -> Option<usize> {
    let n = x.len();
    let mut best = None;
    let mut a: Vec<usize> = (0..n).collect();
    permute(&mut a, 0, &mut |g| {
        let g = Permutation::from_mapping(g.to_vec()).unwrap();
        if tabulate(&g.apply(x).unwrap()) == *target {
            let k = g.derange_count();
            best = Some(best.map_or(k, |b: usize| b.min(k)));
        }
    });
    best
}

fn permute(a: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == a.len() {
        f(a);
        return;
    }
    for j in i..a.len() {
        a.swap(i, j);
        permute(a, i + 1, f);
        a.swap(i, j);
    }
}

fn connecting(report: &SweepReport) -> Criterion {
    let mut c = Criterion::default();
    c.check(
        report.count("connecting") == 0,
        format!("{} connecting permutations move d_Ham records and reach the target", report.connecting_checks),
    );
    let groups = group_by_universe(&all_tables(Domain::new(2, 2, 2), 4));
    let (mut pairs, mut mismatched) = (0, 0);
    for g in &groups {
        for x in g {
            for y in g {
                pairs += 1;
                let xd = x.to_dataset();
                let ham = table_hamming(x, y).finite().unwrap();
                let perm = connecting_permutation(&xd, &y.to_dataset()).unwrap();
                let brute = brute_force_moves(&xd, y);
                if brute != Some(ham as usize) || perm.derange_count() as u64 != ham || !connects(&perm, &xd, y, ham) {
                    mismatched += 1;
                }
            }
        }
    }
    c.check(mismatched == 0, format!("brute-force minimum equals d_Ham on {pairs} pairs, {mismatched} mismatches"));
    c
}

fn invariance() -> Criterion {
    let mut c = Criterion::default();
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut violations = 0;
    for _ in 0..1000 {
        let strata = (0..rng.gen_range(1..5))
            .map(|_| StratumSpec {
                size: rng.gen_range(0..60),
                shape: if rng.gen_bool(0.8) { StratumShape::Mixed } else { StratumShape::Identical },
            })
            .collect();
        let spec = SynthSpec {
            strata,
            hold_levels: rng.gen_range(2..6),
            swap_levels: rng.gen_range(2..6),
            seed: rng.gen(),
        };
        let x = synthesize(&spec).unwrap();
        let out = run_psa_detailed(&x, &PsaParams::new(rng.gen_range(0.0..=1.0), rng.gen()).unwrap());
        let t = tabulate(&x);
        if out.table.invariants() != swap_invariants(&x)
            || out.table.one_way_margins() != t.one_way_margins()
            || out.table.total() != x.len() as u64
        {
            violations += 1;
        }
    }
    c.check(violations == 0, format!("1000 randomized runs, {violations} invariant violations"));
    let x = synthesize(&SynthSpec::mixed(vec![50, 30, 8], 4, 3, 17)).unwrap();
    let same = (0..100).all(|seed| run_psa(&x, &PsaParams::new(0.0, seed).unwrap()) == tabulate(&x));
    c.check(same, "p = 0 returns the input tabulation");
    c
}

fn utility_shape() -> Criterion {
    let mut c = Criterion::default();
    let mut wins = 0;
    for trial in 0..100u64 {
        let x = synthesize(&SynthSpec::mixed(vec![120, 80], 4, 4, trial)).unwrap();
        let r = utility_experiment(&x, &[0.01, 0.5], 20, 1000 + trial).unwrap();
        if r[1].summary.mean > r[0].summary.mean {
            wins += 1;
        }
    }
    c.check(wins >= 95, format!("mean MAPE at p = 0.5 above p = 0.01 in {wins}/100 trials"));
    c
}

type CriterionFn<'a> = Box<dyn Fn() -> Criterion + 'a>;

fn main() -> ExitCode {
    let started = Instant::now();
    let sweep = exhaustive_sweep(&SweepConfig {
        domain: Domain::new(2, 2, 2),
        max_records: 4,
        rates: rates(),
        check_connecting: true,
    })
    .expect("sweep stays inside the enumeration guard");
    let sweep_secs = started.elapsed().as_secs_f64();

    let criteria: Vec<(u8, &str, CriterionFn)> = vec![
        (1, "swap-rate budgets for b = 264331", Box::new(large_stratum_budgets)),
        (2, "counterfactual census swapping budgets", Box::new(census_counterfactuals)),
        (3, "minimum budget and dual swap rates", Box::new(min_budget_analysis)),
        (4, "zCDP conversions and composition", Box::new(census_conversions)),
        (5, "optimality gap f(b)", Box::new(gap_function)),
        (6, "derangement numbers", Box::new(derangement_suite)),
        (7, "oracle soundness sweep", Box::new(|| soundness_sweep(&sweep))),
        (8, "tightness witnesses", Box::new(tightness)),
        (9, "connecting permutations", Box::new(|| connecting(&sweep))),
        (10, "invariance under swapping", Box::new(invariance)),
        (11, "utility trend", Box::new(utility_shape)),
    ];

    let mut failed = 0;
    let mut summary: BTreeMap<u8, bool> = BTreeMap::new();
    for (n, name, run) in &criteria {
        let t = Instant::now();
        let c = run();
        let ok = c.passed();
        let secs = t.elapsed().as_secs_f64() + if *n == 7 { sweep_secs } else { 0.0 };
        println!(
            "criterion {n:>2}: {} {name} ({}/{} checks, {secs:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            c.checks.iter().filter(|x| x.0).count(),
            c.checks.len()
        );
        for (pass, what) in &c.checks {
            println!("    {} {what}", if *pass { "ok  " } else { "FAIL" });
        }
        if !ok {
            failed += 1;
        }
        summary.insert(*n, ok);
    }
    println!(
        "acceptance: {} of {} criteria pass",
        summary.values().filter(|&&v| v).count(),
        summary.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
