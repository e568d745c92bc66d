//! Utility of swapped output measured as the mean absolute percentage error
//! of a two-way marginal table.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{tabulate, ContingencyTable, Dataset};
use crate::psa::{run_psa_detailed, PsaParams};
use crate::{Error, Result};

/// The axis summed out before comparing tables.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Compare `n_·hs`, the table the swap actually perturbs.
    #[default]
    Match,
    /// Compare `n_m·s`, which is invariant.
    Hold,
    /// Compare `n_mh·`, which is invariant.
    Swap,
}

/// Two-way table left after summing out `axis`, flattened row-major.
pub fn collapse(t: &ContingencyTable, axis: Axis) -> Vec<u64> {
    let d = t.domain();
    let (rows, cols) = match axis {
        Axis::Match => (d.hold_levels, d.swap_levels),
        Axis::Hold => (d.match_levels, d.swap_levels),
        Axis::Swap => (d.match_levels, d.hold_levels),
    };
    let mut out = vec![0u64; rows * cols];
    for m in 0..d.match_levels {
        for h in 0..d.hold_levels {
            for s in 0..d.swap_levels {
                let i = match axis {
                    Axis::Match => h * cols + s,
                    Axis::Hold => m * cols + s,
                    Axis::Swap => m * cols + h,
                };
                out[i] += t.get(m, h, s);
            }
        }
    }
    out
}

/// Mean of `|true − swapped| / true` over the collapsed cells. Cells with a
/// true count of zero have no defined ratio and are skipped.
pub fn mape(true_table: &ContingencyTable, swapped: &ContingencyTable, axis: Axis) -> Result<f64> {
    true_table.domain().check_same(&swapped.domain())?;
    let a = collapse(true_table, axis);
    let b = collapse(swapped, axis);
    let (sum, cells) = a
        .iter()
        .zip(&b)
        .filter(|(&t, _)| t > 0)
        .fold((0.0, 0usize), |(sum, n), (&t, &z)| (sum + t.abs_diff(z) as f64 / t as f64, n + 1));
    if cells == 0 {
        return Err(Error::param("true_table", "every collapsed cell is zero"));
    }
    Ok(sum / cells as f64)
}

/// Five-number summary plus the mean. Quartiles are medians of the lower
/// and upper halves, excluding the middle value when the count is odd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let (lower, upper) = if n == 1 { (&v[..], &v[..]) } else { (&v[..n / 2], &v[n.div_ceil(2)..]) };
    Some(Summary {
        min: v[0],
        q1: median(lower),
        median: median(&v),
        q3: median(upper),
        max: v[n - 1],
        mean: v.iter().sum::<f64>() / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub p: f64,
    pub replications: usize,
    pub mape: Vec<f64>,
    pub summary: Summary,
    /// Mean share of records selected per run.
    pub mean_selection_rate: f64,
    /// Mean share of records whose values actually changed per run.
    pub mean_effective_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityMetadata {
    pub axis: Axis,
    pub seed: u64,
    pub zero_cells: String,
    pub quartiles: String,
    pub seed_derivation: String,
}

impl UtilityMetadata {
    pub fn new(axis: Axis, seed: u64) -> Self {
        UtilityMetadata {
            axis,
            seed,
            zero_cells: "cells with zero true count are excluded from the average".into(),
            quartiles: "median of lower and upper halves, middle value excluded for odd counts".into(),
            seed_derivation: "splitmix64 chain over (seed, rate index, replication index)".into(),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at rate index `rate`.
pub fn replication_seed(seed: u64, rate: usize, rep: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ rate as u64) ^ rep as u64)
}

pub fn utility_experiment(x: &Dataset, rates: &[f64], reps: usize, seed: u64) -> Result<Vec<UtilityReport>> {
    utility_experiment_on(x, rates, reps, seed, Axis::Match)
}

/// Runs the mechanism `reps` times at each rate and scores each output.
pub fn utility_experiment_on(
    x: &Dataset,
    rates: &[f64],
    reps: usize,
    seed: u64,
    axis: Axis,
) -> Result<Vec<UtilityReport>> {
    if reps == 0 {
        return Err(Error::param("reps", "at least one replication is required"));
    }
    let truth = tabulate(x);
    rates
        .iter()
        .enumerate()
        .map(|(ri, &p)| {
            let mut values = Vec::with_capacity(reps);
            let (mut sel, mut eff) = (0.0, 0.0);
            for rep in 0..reps {
                let params = PsaParams::new(p, replication_seed(seed, ri, rep))?;
                let out = run_psa_detailed(x, &params);
                values.push(mape(&truth, &out.table, axis)?);
                sel += out.diagnostics.selection_rate();
                eff += out.diagnostics.effective_rate();
            }
            Ok(UtilityReport {
                p,
                replications: reps,
                summary: summarize(&values).expect("reps >= 1"),
                mape: values,
                mean_selection_rate: sel / reps as f64,
                mean_effective_rate: eff / reps as f64,
            })
        })
        .collect()
}

/// Long format: one `rate,rep,mape` row per run.
pub fn write_long_csv<W: Write>(reports: &[UtilityReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rate", "rep", "mape"])?;
    for r in reports {
        for (i, v) in r.mape.iter().enumerate() {
            w.write_record([format!("{:.6}", r.p), i.to_string(), format!("{v:.6}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilitySummary {
    pub metadata: UtilityMetadata,
    pub reports: Vec<UtilityReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Domain;
    use crate::synth::{synthesize, SynthSpec};
    use proptest::prelude::*;

    fn table(d: Domain, counts: &[u64]) -> ContingencyTable {
        ContingencyTable::from_counts(d, counts.to_vec()).unwrap()
    }

    #[test]
    fn hand_example() {
        let d = Domain::new(1, 2, 2);
        let t = table(d, &[2, 2, 2, 2]);
        let z = table(d, &[1, 3, 3, 1]);
        assert!((mape(&t, &z, Axis::Match).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(mape(&t, &t, Axis::Match).unwrap(), 0.0);
    }

    #[test]
    fn zero_cells_are_skipped() {
        let d = Domain::new(1, 2, 2);
        let t = table(d, &[2, 0, 0, 2]);
        let z = table(d, &[1, 1, 1, 1]);
        assert!((mape(&t, &z, Axis::Match).unwrap() - 0.5).abs() < 1e-15);
        assert!(mape(&table(d, &[0; 4]), &z, Axis::Match).is_err());
    }

    #[test]
    fn collapse_axes() {
        let d = Domain::new(2, 2, 2);
        let t = table(d, &[1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(collapse(&t, Axis::Match), vec![6, 8, 10, 12]);
        assert_eq!(collapse(&t, Axis::Hold), vec![4, 6, 12, 14]);
        assert_eq!(collapse(&t, Axis::Swap), vec![3, 7, 11, 15]);
    }

    #[test]
    fn quartiles_by_halves() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.5, 3.0, 4.5));
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max, s.mean), (1.0, 1.5, 2.5, 3.5, 4.0, 2.5));
        let s = summarize(&[7.0]).unwrap();
        assert_eq!((s.q1, s.q3), (7.0, 7.0));
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn zero_rate_has_zero_error() {
        let x = synthesize(&SynthSpec::mixed(vec![30, 20], 3, 3, 1)).unwrap();
        let r = utility_experiment(&x, &[0.0], 5, 7).unwrap();
        assert!(r[0].mape.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invariant_margins_never_move() {
        let x = synthesize(&SynthSpec::mixed(vec![40, 25, 1], 3, 4, 2)).unwrap();
        for axis in [Axis::Hold, Axis::Swap] {
            let r = utility_experiment_on(&x, &[0.1, 0.5, 1.0], 4, 3, axis).unwrap();
            assert!(r.iter().flat_map(|r| &r.mape).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn reproducible_reports() {
        let x = synthesize(&SynthSpec::mixed(vec![30, 30], 2, 3, 5)).unwrap();
        let a = utility_experiment(&x, &[0.05, 0.5], 6, 11).unwrap();
        assert_eq!(a, utility_experiment(&x, &[0.05, 0.5], 6, 11).unwrap());
        assert_ne!(replication_seed(1, 0, 1), replication_seed(1, 1, 0));
        assert!(utility_experiment(&x, &[0.1], 0, 1).is_err());
    }

    #[test]
    fn long_csv_layout() {
        let x = synthesize(&SynthSpec::mixed(vec![10], 2, 2, 5)).unwrap();
        let r = utility_experiment(&x, &[0.0], 2, 1).unwrap();
        let mut buf = Vec::new();
        write_long_csv(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "rate,rep,mape\n0.000000,0,0.000000\n0.000000,1,0.000000\n");
    }

    proptest! {
        #[test]
        fn mape_is_non_negative(a in proptest::collection::vec(0u64..20, 4), b in proptest::collection::vec(0u64..20, 4)) {
            let d = Domain::new(1, 2, 2);
            let (t, z) = (table(d, &a), table(d, &b));
            match mape(&t, &z, Axis::Match) {
                Ok(v) => {
                    prop_assert!(v >= 0.0);
                    let equal_on_support = a.iter().zip(&b).all(|(x, y)| *x == 0 || x == y);
                    prop_assert_eq!(v == 0.0, equal_on_support);
                }
                Err(_) => prop_assert!(a.iter().all(|&c| c == 0)),
            }
        }
    }
}
