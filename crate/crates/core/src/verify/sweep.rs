use std::collections::{BTreeSet, HashMap};

use num_rational::BigRational;
use serde::Serialize;

use super::bounds::applicable_lower_bounds;
use super::connect::{connecting_permutation, validates};
use super::universe::universe_of;
use super::{exact_psa_distribution, optimal_from_laws, verdict_from, within, ExactDistribution};
use crate::budget::psa_budget;
use crate::data::{table_hamming, table_max_stratum_b, ContingencyTable, Domain};
use crate::rational::to_f64;
use crate::{Epsilon, Result};

/// Every table over `domain` holding at most `max_records` records, i.e.
/// every dataset up to record order.
pub fn all_tables(domain: Domain, max_records: u64) -> Vec<ContingencyTable> {
    let cells = domain.cell_count();
    let mut out = Vec::new();
    let mut counts = vec![0u64; cells];
    fn walk(i: usize, left: u64, counts: &mut Vec<u64>, domain: Domain, out: &mut Vec<ContingencyTable>) {
        if i == counts.len() {
            out.push(ContingencyTable::from_counts(domain, counts.clone()).expect("sized to domain"));
            return;
        }
        for v in 0..=left {
            counts[i] = v;
            walk(i + 1, left - v, counts, domain, out);
        }
        counts[i] = 0;
    }
    walk(0, max_records, &mut counts, domain, &mut out);
    out.sort();
    out
}

/// Tables grouped by swap invariants, in order of first appearance.
pub fn group_by_universe(tables: &[ContingencyTable]) -> Vec<Vec<ContingencyTable>> {
    let mut index = HashMap::new();
    let mut groups: Vec<Vec<ContingencyTable>> = Vec::new();
    for t in tables {
        let slot = *index.entry(t.invariants()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(t.clone());
    }
    groups
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub domain: Domain,
    pub max_records: u64,
    pub rates: Vec<BigRational>,
    /// Also build and check a connecting permutation for every ordered pair.
    pub check_connecting: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub check: &'static str,
    pub x: ContingencyTable,
    pub x_prime: Option<ContingencyTable>,
    pub p: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepReport {
    pub datasets: usize,
    pub universes: usize,
    pub ordered_pairs: usize,
    pub dp_checks: usize,
    pub lower_bound_checks: usize,
    pub connecting_checks: usize,
    /// Largest `measured / bound` seen over finite, positive bounds.
    pub max_bound_ratio: f64,
    pub failures: Vec<SweepFailure>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn count(&self, check: &str) -> usize {
        self.failures.iter().filter(|f| f.check == check).count()
    }
}

/// Runs every oracle check on every same-universe ordered pair of datasets
/// with at most `max_records` records over `domain`:
///
/// * `dp`: exact distance within `psa_budget(p, b) × d_Ham`;
/// * `support`: the output support equals the enumerated universe;
/// * `universe`: universe enumeration agrees with grouping by invariants;
/// * `lower-bound`: the measured optimal budget meets every witnessed bound
///   and stays below the closed-form budget;
/// * `connecting`: the connecting permutation moves exactly `d_Ham` records
///   and reaches the target table.
pub fn exhaustive_sweep(config: &SweepConfig) -> Result<SweepReport> {
    let tables = all_tables(config.domain, config.max_records);
    let groups = group_by_universe(&tables);
    let mut report = SweepReport {
        datasets: tables.len(),
        universes: groups.len(),
        ..Default::default()
    };
    for group in &groups {
        let b = table_max_stratum_b(&group[0]);
        let members: BTreeSet<ContingencyTable> = group.iter().cloned().collect();
        if universe_of(&group[0].invariants())? != members {
            report.failures.push(SweepFailure {
                check: "universe",
                x: group[0].clone(),
                x_prime: None,
                p: String::new(),
                detail: "enumerated universe differs from invariant grouping".into(),
            });
        }
        report.ordered_pairs += group.len() * (group.len() - 1);

        if config.check_connecting {
            for x in group {
                for y in group {
                    report.connecting_checks += 1;
                    let xd = x.to_dataset();
                    let moves = table_hamming(x, y).finite().expect("equal sizes");
                    let ok = connecting_permutation(&xd, &y.to_dataset())
                        .map(|g| validates(&g, &xd, y, moves))
                        .unwrap_or(false);
                    if !ok {
                        report.failures.push(SweepFailure {
                            check: "connecting",
                            x: x.clone(),
                            x_prime: Some(y.clone()),
                            p: String::new(),
                            detail: format!("no valid connecting permutation with {moves} moves"),
                        });
                    }
                }
            }
        }

        for p in &config.rates {
            let budget = psa_budget(to_f64(p), b)?.epsilon;
            let laws = group
                .iter()
                .map(|t| exact_psa_distribution(&t.to_dataset(), p))
                .collect::<Result<Vec<ExactDistribution>>>()?;
            for (t, law) in group.iter().zip(&laws) {
                if law.tables() != members {
                    report.failures.push(SweepFailure {
                        check: "support",
                        x: t.clone(),
                        x_prime: None,
                        p: p.to_string(),
                        detail: format!("support has {} tables, universe {}", law.len(), members.len()),
                    });
                }
            }
            for i in 0..group.len() {
                for j in 0..group.len() {
                    if i == j {
                        continue;
                    }
                    report.dp_checks += 1;
                    let v = verdict_from(&group[i], &group[j], &laws[i], &laws[j], budget);
                    if !v.bound.is_infinite() && v.bound.value() > 0.0 && !v.measured.is_infinite() {
                        report.max_bound_ratio = report.max_bound_ratio.max(v.measured.value() / v.bound.value());
                    }
                    if !v.pass {
                        report.failures.push(SweepFailure {
                            check: "dp",
                            x: group[i].clone(),
                            x_prime: Some(group[j].clone()),
                            p: p.to_string(),
                            detail: format!("measured {} > bound {}", v.measured, v.bound),
                        });
                    }
                }
            }
            let refs: Vec<&ContingencyTable> = group.iter().collect();
            let optimal = optimal_from_laws(&refs, &laws).epsilon;
            if !within(optimal, budget) {
                report.failures.push(SweepFailure {
                    check: "lower-bound",
                    x: group[0].clone(),
                    x_prime: None,
                    p: p.to_string(),
                    detail: format!("optimal {optimal} exceeds closed-form budget {budget}"),
                });
            }
            for lb in applicable_lower_bounds(&group[0], group.len(), p) {
                report.lower_bound_checks += 1;
                if !meets(optimal, lb.value) {
                    report.failures.push(SweepFailure {
                        check: "lower-bound",
                        x: group[0].clone(),
                        x_prime: None,
                        p: p.to_string(),
                        detail: format!("optimal {optimal} below {:?} bound {}", lb.kind, lb.value),
                    });
                }
            }
        }
    }
    Ok(report)
}

/// `value >= bound` up to the logarithm slack.
pub(crate) fn meets(value: Epsilon, bound: Epsilon) -> bool {
    value.is_infinite() || (!bound.is_infinite() && value.value() + super::VERDICT_TOLERANCE >= bound.value())
}
