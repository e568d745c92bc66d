//! The Permutation Swapping Algorithm.
//!
//! Within each matching stratum of size at least two, every record is
//! selected independently with probability `p`. A draw that selects exactly
//! one record is discarded and redrawn. The selected records then receive a
//! uniformly random derangement of their swap values; hold and match values
//! stay in place.
//!
//! Randomness for stratum `m` comes from a ChaCha20 stream keyed by
//! `(seed, m)`, so the output does not depend on the order in which strata
//! are processed.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::budget::derangement_count;
use crate::data::{tabulate, ContingencyTable, Dataset, Record};
use crate::rational::{is_unit_interval, pow};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsaParams {
    pub p: f64,
    pub seed: u64,
}

impl PsaParams {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("p", format!("swap rate must lie in [0, 1], got {p}")));
        }
        Ok(PsaParams { p, seed })
    }
}

/// A bijection on positions `0..n`. Applied to a dataset, position `i`
/// keeps its match and hold values and takes the swap value of position
/// `mapping[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            mapping: (0..n).collect(),
        }
    }

    pub fn from_mapping(mapping: Vec<usize>) -> Result<Self> {
        if !is_bijection(&mapping) {
            return Err(Error::param("mapping", "not a bijection on 0..n"));
        }
        Ok(Permutation { mapping })
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    /// Number of positions not fixed.
    pub fn derange_count(&self) -> usize {
        self.mapping.iter().enumerate().filter(|&(i, &g)| i != g).count()
    }

    pub fn is_identity(&self) -> bool {
        self.derange_count() == 0
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.len(), other.len(), "composing permutations of different sizes");
        Permutation {
            mapping: other.mapping.iter().map(|&j| self.mapping[j]).collect(),
        }
    }

    /// Swap the images of positions `a` and `b`.
    pub fn transpose(&mut self, a: usize, b: usize) {
        self.mapping.swap(a, b);
    }

    /// `Z_i = (M_i, H_i, S_{g(i)})`.
    pub fn apply(&self, x: &Dataset) -> Result<Dataset> {
        if self.len() != x.len() {
            return Err(Error::param(
                "permutation",
                format!("acts on {} positions, dataset has {}", self.len(), x.len()),
            ));
        }
        let rs = x.records();
        let records = rs
            .iter()
            .zip(&self.mapping)
            .map(|(r, &g)| Record::new(r.m, r.h, rs[g].s))
            .collect();
        let out = Dataset::new(x.domain(), records)?;
        Ok(match x.schema() {
            Some(s) => out.with_schema(s.clone()),
            None => out,
        })
    }
}

pub fn is_bijection(mapping: &[usize]) -> bool {
    let mut seen = vec![false; mapping.len()];
    for &g in mapping {
        if g >= mapping.len() || seen[g] {
            return false;
        }
        seen[g] = true;
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    /// Selected positions in increasing order; never exactly one.
    pub indices: Vec<usize>,
    /// Draws discarded because they selected exactly one record.
    pub retries: u64,
}

/// Independent Bernoulli(`p`) selection of `0..n`, redrawn from scratch
/// whenever exactly one position is selected.
pub fn select_records<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Selection {
    assert!((0.0..=1.0).contains(&p), "swap rate out of range");
    if n < 2 || p == 0.0 {
        return Selection {
            indices: Vec::new(),
            retries: 0,
        };
    }
    let mut retries = 0;
    loop {
        let indices: Vec<usize> = (0..n).filter(|_| rng.gen_bool(p)).collect();
        if indices.len() != 1 {
            return Selection { indices, retries };
        }
        retries += 1;
    }
}

/// Uniform derangement of `0..k` by rejection from uniform shuffles.
/// `k = 0` gives the empty permutation; `k = 1` has no derangement.
pub fn sample_derangement<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<Permutation> {
    sample_derangement_counted(k, rng).map(|(g, _)| g)
}

fn sample_derangement_counted<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<(Permutation, u64)> {
    if k == 1 {
        return Err(Error::param("k", "a single record cannot be deranged"));
    }
    let mut mapping: Vec<usize> = (0..k).collect();
    let mut rejections = 0;
    loop {
        mapping.shuffle(rng);
        if mapping.iter().enumerate().all(|(i, &g)| i != g) {
            return Ok((Permutation { mapping }, rejections));
        }
        rejections += 1;
    }
}

/// The ChaCha20 stream owned by stratum `m`.
pub fn stratum_rng(seed: u64, m: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(m as u64);
    rng
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PsaDiagnostics {
    pub records: usize,
    /// Records selected for swapping.
    pub selected: usize,
    /// Records whose `(h, s)` pair changed, i.e. swaps that were not vacuous.
    pub changed: usize,
    pub selection_retries: u64,
    pub derangement_rejections: u64,
}

impl PsaDiagnostics {
    pub fn selection_rate(&self) -> f64 {
        if self.records == 0 {
            0.0
        } else {
            self.selected as f64 / self.records as f64
        }
    }

    pub fn effective_rate(&self) -> f64 {
        if self.records == 0 {
            0.0
        } else {
            self.changed as f64 / self.records as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct PsaOutcome {
    pub table: ContingencyTable,
    pub swapped: Dataset,
    pub permutation: Permutation,
    pub diagnostics: PsaDiagnostics,
}

pub fn run_psa(x: &Dataset, params: &PsaParams) -> ContingencyTable {
    run_psa_detailed(x, params).table
}

pub fn run_psa_detailed(x: &Dataset, params: &PsaParams) -> PsaOutcome {
    let mut permutation = Permutation::identity(x.len());
    let mut diagnostics = PsaDiagnostics {
        records: x.len(),
        ..Default::default()
    };
    for (m, positions) in x.strata().iter().enumerate() {
        if positions.len() < 2 {
            continue;
        }
        let mut rng = stratum_rng(params.seed, m);
        let selection = select_records(positions.len(), params.p, &mut rng);
        diagnostics.selection_retries += selection.retries;
        diagnostics.selected += selection.indices.len();
        let (local, rejections) = sample_derangement_counted(selection.indices.len(), &mut rng)
            .expect("selection never returns exactly one record");
        diagnostics.derangement_rejections += rejections;
        for (i, &g) in local.mapping.iter().enumerate() {
            let target = positions[selection.indices[i]];
            permutation.mapping[target] = positions[selection.indices[g]];
        }
    }
    let swapped = permutation.apply(x).expect("permutation sized to the dataset");
    diagnostics.changed = x
        .records()
        .iter()
        .zip(swapped.records())
        .filter(|(a, b)| a != b)
        .count();
    PsaOutcome {
        table: tabulate(&swapped),
        swapped,
        permutation,
        diagnostics,
    }
}

/// Exact probability that a stratum of `n` records receives one particular
/// permutation deranging `k` of them:
/// `p^k (1−p)^(n−k) / ((1 − n p (1−p)^(n−1)) d(k))`.
///
/// With `0^0 = 1` the formula is also the exact law at `p ∈ {0, 1}`.
/// Strata with fewer than two records are never permuted.
pub fn stratum_permutation_prob(k: usize, n: usize, p: &BigRational) -> Result<BigRational> {
    if k == 1 {
        return Err(Error::param("k", "no permutation deranges exactly one record"));
    }
    if k > n {
        return Err(Error::param("k", format!("cannot derange {k} of {n} records")));
    }
    if !is_unit_interval(p) {
        return Err(Error::param("p", format!("swap rate must lie in [0, 1], got {p}")));
    }
    if n < 2 {
        return Ok(BigRational::one());
    }
    let one = BigRational::one();
    let q = &one - p;
    let exactly_one = BigRational::from_integer(BigInt::from(n)) * p * pow(&q, n - 1);
    let accept = &one - exactly_one;
    let d = BigRational::from_integer(BigInt::from(derangement_count(k as u64)));
    let num = pow(p, k) * pow(&q, n - k);
    if num.is_zero() {
        return Ok(BigRational::zero());
    }
    Ok(num / (accept * d))
}
