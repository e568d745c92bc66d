//! Records, contingency tables, swap invariants and distances.
//!
//! A [`Dataset`] keeps its records in input order because the swapping
//! mechanism permutes positions, but every comparison exposed here is at the
//! multiset level: two datasets holding the same records in a different order
//! tabulate to the same [`ContingencyTable`], have distance zero, and share a
//! universe.

mod ingest;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use ingest::{cross_classify, read_csv, write_csv, Role, RoleConfig};

/// Number of categories on the match, hold and swap axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Domain {
    pub match_levels: usize,
    pub hold_levels: usize,
    pub swap_levels: usize,
}

impl Domain {
    pub fn new(match_levels: usize, hold_levels: usize, swap_levels: usize) -> Self {
        Domain {
            match_levels,
            hold_levels,
            swap_levels,
        }
    }

    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.match_levels, self.hold_levels, self.swap_levels)
    }

    pub fn cell_count(&self) -> usize {
        self.match_levels * self.hold_levels * self.swap_levels
    }

    pub fn contains(&self, r: &Record) -> bool {
        r.m < self.match_levels && r.h < self.hold_levels && r.s < self.swap_levels
    }

    /// Row-major `(m, h, s)` offset.
    pub fn cell_index(&self, m: usize, h: usize, s: usize) -> usize {
        (m * self.hold_levels + h) * self.swap_levels + s
    }

    pub(crate) fn check_same(&self, other: &Domain) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DomainMismatch {
                left: self.as_tuple(),
                right: other.as_tuple(),
            })
        }
    }
}

/// One unit after cross-classification: match, hold and swap category indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Record {
    pub m: usize,
    pub h: usize,
    pub s: usize,
}

impl Record {
    pub const fn new(m: usize, h: usize, s: usize) -> Self {
        Record { m, h, s }
    }
}

impl From<(usize, usize, usize)> for Record {
    fn from((m, h, s): (usize, usize, usize)) -> Self {
        Record { m, h, s }
    }
}

/// Category labels for each axis, in index order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub match_columns: Vec<String>,
    pub hold_columns: Vec<String>,
    pub swap_columns: Vec<String>,
    pub match_labels: Vec<String>,
    pub hold_labels: Vec<String>,
    pub swap_labels: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<Record>,
    domain: Domain,
    schema: Option<Schema>,
}

impl Dataset {
    pub fn new(domain: Domain, records: Vec<Record>) -> Result<Self> {
        if let Some(index) = records.iter().position(|r| !domain.contains(r)) {
            return Err(Error::RecordOutOfDomain {
                index,
                domain: domain.as_tuple(),
            });
        }
        Ok(Dataset {
            records,
            domain,
            schema: None,
        })
    }

    /// Convenience constructor from `(m, h, s)` triples; panics on out-of-domain input.
    pub fn from_triples(domain: Domain, triples: &[(usize, usize, usize)]) -> Self {
        Dataset::new(domain, triples.iter().copied().map(Record::from).collect())
            .expect("triples must lie inside the domain")
    }

    pub fn with_schema(mut self, schema: Schema) -> Self {
        self.schema = Some(schema);
        self
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn schema(&self) -> Option<&Schema> {
        self.schema.as_ref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record positions grouped by matching stratum, each in input order.
    pub fn strata(&self) -> Vec<Vec<usize>> {
        let mut strata = vec![Vec::new(); self.domain.match_levels];
        for (i, r) in self.records.iter().enumerate() {
            strata[r.m].push(i);
        }
        strata
    }

    /// Same records with positions permuted: record `i` of the result is
    /// record `order[i]` of `self`.
    pub fn reordered(&self, order: &[usize]) -> Dataset {
        Dataset {
            records: order.iter().map(|&i| self.records[i]).collect(),
            domain: self.domain,
            schema: self.schema.clone(),
        }
    }

    /// Multiset equality.
    pub fn same_records(&self, other: &Dataset) -> bool {
        self.domain == other.domain && tabulate(self) == tabulate(other)
    }
}

/// Fully saturated `M × H × S` count tensor, stored row-major in `(m, h, s)`.
///
/// The count vector doubles as the canonical key: two tables are equal iff
/// their domains and count vectors are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContingencyTable {
    domain: Domain,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn zeros(domain: Domain) -> Self {
        ContingencyTable {
            domain,
            counts: vec![0; domain.cell_count()],
        }
    }

    pub fn from_counts(domain: Domain, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != domain.cell_count() {
            return Err(Error::param(
                "counts",
                format!("expected {} cells, got {}", domain.cell_count(), counts.len()),
            ));
        }
        Ok(ContingencyTable { domain, counts })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, m: usize, h: usize, s: usize) -> u64 {
        self.counts[self.domain.cell_index(m, h, s)]
    }

    pub(crate) fn increment(&mut self, r: &Record) {
        let i = self.domain.cell_index(r.m, r.h, r.s);
        self.counts[i] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `H × S` slice for stratum `m`.
    pub fn stratum(&self, m: usize) -> &[u64] {
        let width = self.domain.hold_levels * self.domain.swap_levels;
        &self.counts[m * width..(m + 1) * width]
    }

    pub fn stratum_size(&self, m: usize) -> u64 {
        self.stratum(m).iter().sum()
    }

    /// Expand back into records in canonical `(m, h, s)` order.
    pub fn to_dataset(&self) -> Dataset {
        let d = self.domain;
        let mut records = Vec::with_capacity(self.total() as usize);
        for m in 0..d.match_levels {
            for h in 0..d.hold_levels {
                for s in 0..d.swap_levels {
                    for _ in 0..self.get(m, h, s) {
                        records.push(Record::new(m, h, s));
                    }
                }
            }
        }
        Dataset {
            records,
            domain: d,
            schema: None,
        }
    }

    /// Canonical byte layout: the three domain sizes, then every cell count
    /// in row-major `(m, h, s)` order, all as little-endian `u64`.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let d = self.domain;
        let mut out = Vec::with_capacity(8 * (3 + self.counts.len()));
        for v in [d.match_levels, d.hold_levels, d.swap_levels] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for c in &self.counts {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn invariants(&self) -> SwapInvariants {
        let d = self.domain;
        let mut mh = vec![0u64; d.match_levels * d.hold_levels];
        let mut ms = vec![0u64; d.match_levels * d.swap_levels];
        for m in 0..d.match_levels {
            for h in 0..d.hold_levels {
                for s in 0..d.swap_levels {
                    let n = self.get(m, h, s);
                    mh[m * d.hold_levels + h] += n;
                    ms[m * d.swap_levels + s] += n;
                }
            }
        }
        SwapInvariants {
            domain: d,
            mh_margins: mh,
            ms_margins: ms,
        }
    }

    /// One-dimensional margins `(n_m··, n_·h·, n_··s)`.
    pub fn one_way_margins(&self) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
        let d = self.domain;
        let mut m_margin = vec![0; d.match_levels];
        let mut h_margin = vec![0; d.hold_levels];
        let mut s_margin = vec![0; d.swap_levels];
        for (i, &n) in self.counts.iter().enumerate() {
            let (m, rest) = (i / (d.hold_levels * d.swap_levels), i % (d.hold_levels * d.swap_levels));
            m_margin[m] += n;
            h_margin[rest / d.swap_levels] += n;
            s_margin[rest % d.swap_levels] += n;
        }
        (m_margin, h_margin, s_margin)
    }
}

impl fmt::Display for ContingencyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

/// The swap-invariant margin vector: every `n_mh·` and every `n_m·s`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwapInvariants {
    pub domain: Domain,
    /// `M × H`, row-major.
    pub mh_margins: Vec<u64>,
    /// `M × S`, row-major.
    pub ms_margins: Vec<u64>,
}

impl SwapInvariants {
    pub fn mh(&self, m: usize, h: usize) -> u64 {
        self.mh_margins[m * self.domain.hold_levels + h]
    }

    pub fn ms(&self, m: usize, s: usize) -> u64 {
        self.ms_margins[m * self.domain.swap_levels + s]
    }

    pub fn mh_row(&self, m: usize) -> &[u64] {
        let w = self.domain.hold_levels;
        &self.mh_margins[m * w..(m + 1) * w]
    }

    pub fn ms_row(&self, m: usize) -> &[u64] {
        let w = self.domain.swap_levels;
        &self.ms_margins[m * w..(m + 1) * w]
    }

    /// `n_m··` from the `mh` family.
    pub fn stratum_sizes(&self) -> Vec<u64> {
        (0..self.domain.match_levels)
            .map(|m| self.mh_row(m).iter().sum())
            .collect()
    }

    /// `n_m··` from the `ms` family; always equal to [`Self::stratum_sizes`].
    pub fn stratum_sizes_from_swap(&self) -> Vec<u64> {
        (0..self.domain.match_levels)
            .map(|m| self.ms_row(m).iter().sum())
            .collect()
    }
}

/// A Hamming distance, which is infinite between datasets of different sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Distance {
    Finite(u64),
    Infinite,
}

impl Distance {
    pub fn finite(self) -> Option<u64> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Infinite => f.write_str("inf"),
        }
    }
}

pub fn tabulate(x: &Dataset) -> ContingencyTable {
    let mut table = ContingencyTable::zeros(x.domain);
    for r in &x.records {
        table.increment(r);
    }
    table
}

pub fn swap_invariants(x: &Dataset) -> SwapInvariants {
    tabulate(x).invariants()
}

/// `Σ |n_mhs − n'_mhs|` over all interior cells.
pub fn l1_distance(x: &Dataset, y: &Dataset) -> Result<u64> {
    x.domain.check_same(&y.domain)?;
    Ok(table_l1(&tabulate(x), &tabulate(y)))
}

pub fn table_l1(a: &ContingencyTable, b: &ContingencyTable) -> u64 {
    a.counts
        .iter()
        .zip(&b.counts)
        .map(|(&u, &v)| u.abs_diff(v))
        .sum()
}

/// Half the ℓ1 distance for equal sizes, infinite otherwise.
pub fn hamming_distance(x: &Dataset, y: &Dataset) -> Result<Distance> {
    x.domain.check_same(&y.domain)?;
    Ok(table_hamming(&tabulate(x), &tabulate(y)))
}

pub fn table_hamming(a: &ContingencyTable, b: &ContingencyTable) -> Distance {
    if a.total() != b.total() {
        return Distance::Infinite;
    }
    let l1 = table_l1(a, b);
    assert!(l1.is_multiple_of(2), "ℓ1 distance between equal-size tables must be even");
    Distance::Finite(l1 / 2)
}

pub fn same_universe(x: &Dataset, y: &Dataset) -> Result<bool> {
    x.domain.check_same(&y.domain)?;
    Ok(swap_invariants(x) == swap_invariants(y))
}

/// Largest stratum size `n_m··` among strata holding at least two records
/// that differ in `(h, s)`; zero when every stratum is homogeneous.
pub fn max_stratum_b(x: &Dataset) -> u64 {
    table_max_stratum_b(&tabulate(x))
}

pub fn table_max_stratum_b(t: &ContingencyTable) -> u64 {
    (0..t.domain.match_levels)
        .filter(|&m| t.stratum(m).iter().filter(|&&c| c > 0).count() >= 2)
        .map(|m| t.stratum_size(m))
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d222() -> Domain {
        Domain::new(2, 2, 2)
    }

    #[test]
    fn tabulate_counts_cells() {
        let x = Dataset::from_triples(Domain::new(1, 2, 2), &[(0, 0, 0), (0, 0, 0), (0, 1, 1)]);
        let t = tabulate(&x);
        assert_eq!(t.get(0, 0, 0), 2);
        assert_eq!(t.get(0, 1, 1), 1);
        assert_eq!(t.get(0, 0, 1), 0);
        assert_eq!(t.get(0, 1, 0), 0);
        assert_eq!(t.total(), 3);
    }

    #[test]
    fn empty_dataset_tabulates_to_zero() {
        let x = Dataset::new(d222(), vec![]).unwrap();
        let t = tabulate(&x);
        assert!(t.counts().iter().all(|&c| c == 0));
        assert_eq!(max_stratum_b(&x), 0);
    }

    #[test]
    fn degenerate_domain_is_legal() {
        let x = Dataset::new(Domain::new(0, 3, 3), vec![]).unwrap();
        assert_eq!(tabulate(&x).counts().len(), 0);
        assert_eq!(swap_invariants(&x).mh_margins.len(), 0);
        assert_eq!(hamming_distance(&x, &x).unwrap(), Distance::Finite(0));
    }

    #[test]
    fn out_of_domain_record_rejected() {
        let err = Dataset::new(d222(), vec![Record::new(0, 2, 0)]).unwrap_err();
        assert!(matches!(err, Error::RecordOutOfDomain { index: 0, .. }));
    }

    #[test]
    fn tabulate_ignores_order() {
        let x = Dataset::from_triples(d222(), &[(0, 0, 1), (1, 1, 0), (0, 1, 1)]);
        let y = x.reordered(&[2, 0, 1]);
        assert_eq!(tabulate(&x), tabulate(&y));
        assert!(x.same_records(&y));
    }

    #[test]
    fn invariants_of_two_record_pair() {
        let x = Dataset::from_triples(Domain::new(1, 2, 2), &[(0, 0, 0), (0, 1, 1)]);
        let inv = swap_invariants(&x);
        assert_eq!(inv.mh_margins, vec![1, 1]);
        assert_eq!(inv.ms_margins, vec![1, 1]);
    }

    #[test]
    fn one_swap_distances() {
        // (0,0,0),(0,1,1) versus the swapped pair (0,0,1),(0,1,0): four cells move by one.
        let d = Domain::new(1, 2, 2);
        let x = Dataset::from_triples(d, &[(0, 0, 0), (0, 1, 1)]);
        let y = Dataset::from_triples(d, &[(0, 0, 1), (0, 1, 0)]);
        assert_eq!(l1_distance(&x, &y).unwrap(), 4);
        assert_eq!(hamming_distance(&x, &y).unwrap(), Distance::Finite(2));
        assert!(same_universe(&x, &y).unwrap());
    }

    #[test]
    fn distance_edge_cases() {
        let d = d222();
        let a = Dataset::from_triples(d, &[(0, 0, 0)]);
        let b = Dataset::from_triples(d, &[(1, 1, 1)]);
        let c = Dataset::from_triples(d, &[(1, 1, 1), (0, 0, 0)]);
        assert_eq!(l1_distance(&a, &a).unwrap(), 0);
        assert_eq!(l1_distance(&a, &b).unwrap(), 2);
        assert_eq!(hamming_distance(&a, &c).unwrap(), Distance::Infinite);
        assert_eq!(hamming_distance(&c, &c.reordered(&[1, 0])).unwrap(), Distance::Finite(0));
    }

    #[test]
    fn domain_mismatch_is_an_error() {
        let a = Dataset::from_triples(d222(), &[(0, 0, 0)]);
        let b = Dataset::from_triples(Domain::new(1, 2, 2), &[(0, 0, 0)]);
        assert!(matches!(l1_distance(&a, &b), Err(Error::DomainMismatch { .. })));
        assert!(hamming_distance(&a, &b).is_err());
        assert!(same_universe(&a, &b).is_err());
    }

    #[test]
    fn universe_membership() {
        let d = Domain::new(1, 2, 2);
        let a = Dataset::from_triples(d, &[(0, 0, 0)]);
        let b = Dataset::from_triples(d, &[(0, 1, 1)]);
        assert!(!same_universe(&a, &b).unwrap());
    }

    #[test]
    fn max_stratum_b_cases() {
        let d = Domain::new(2, 2, 2);
        let identical = Dataset::from_triples(d, &[(0, 1, 1), (0, 1, 1), (1, 0, 0)]);
        assert_eq!(max_stratum_b(&identical), 0);
        let pair = Dataset::from_triples(d, &[(0, 0, 0), (0, 1, 0)]);
        assert_eq!(max_stratum_b(&pair), 2);
        let mixed = Dataset::from_triples(
            d,
            &[
                (0, 0, 0),
                (0, 0, 0),
                (0, 0, 0),
                (0, 0, 0),
                (0, 0, 0),
                (1, 0, 0),
                (1, 1, 0),
                (1, 1, 1),
            ],
        );
        assert_eq!(max_stratum_b(&mixed), 3);
    }

    #[test]
    fn stratum_sizes_agree_across_margin_families() {
        let x = Dataset::from_triples(d222(), &[(0, 0, 1), (0, 1, 1), (1, 1, 0)]);
        let inv = swap_invariants(&x);
        assert_eq!(inv.stratum_sizes(), vec![2, 1]);
        assert_eq!(inv.stratum_sizes(), inv.stratum_sizes_from_swap());
    }

    #[test]
    fn canonical_bytes_layout() {
        let t = tabulate(&Dataset::from_triples(Domain::new(1, 1, 2), &[(0, 0, 1)]));
        let bytes = t.canonical_bytes();
        assert_eq!(bytes.len(), 8 * 5);
        assert_eq!(&bytes[0..8], &1u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &2u64.to_le_bytes());
        assert_eq!(&bytes[32..40], &1u64.to_le_bytes());
    }

    #[test]
    fn table_round_trips_through_dataset() {
        let x = Dataset::from_triples(d222(), &[(1, 0, 1), (0, 1, 0), (1, 0, 1)]);
        let t = tabulate(&x);
        assert_eq!(tabulate(&t.to_dataset()), t);
    }
}
