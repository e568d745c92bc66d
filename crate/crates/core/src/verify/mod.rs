//! Exact brute-force oracle for the swapping mechanism on tiny datasets.
//!
//! Output distributions are computed with exact rationals by enumerating
//! every permutation the mechanism can draw. The only floating-point step is
//! the final logarithm of an exact ratio.

mod bounds;
mod connect;
mod sweep;
mod universe;

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::data::{
    same_universe, table_hamming, table_max_stratum_b, tabulate, ContingencyTable, Dataset, Distance,
    Domain,
};
use crate::psa::stratum_permutation_prob;
use crate::rational::{is_unit_interval, ln_rational};
use crate::{Epsilon, Error, Result};

pub use bounds::applicable_lower_bounds;
pub use connect::{connecting_permutation, validates as connects};
pub use sweep::{all_tables, group_by_universe, exhaustive_sweep, SweepConfig, SweepFailure, SweepReport};
pub use universe::enumerate_universe;

/// Largest number of composite permutations (or universe members) the
/// oracle will enumerate.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Random events drawn per comparison to confirm that the event supremum is
/// attained on a single outcome.
pub const SPOT_CHECK_EVENTS: usize = 200;

/// Slack for the final real-valued logarithm.
pub const VERDICT_TOLERANCE: f64 = 1e-12;

/// Output law of the mechanism on one input: every reachable table with its
/// exact, strictly positive probability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDistribution {
    domain: Domain,
    support: BTreeMap<ContingencyTable, BigRational>,
}

impl ExactDistribution {
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn support(&self) -> &BTreeMap<ContingencyTable, BigRational> {
        &self.support
    }

    pub fn prob(&self, t: &ContingencyTable) -> BigRational {
        self.support.get(t).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn total(&self) -> BigRational {
        self.support.values().fold(BigRational::zero(), |acc, v| acc + v)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn tables(&self) -> BTreeSet<ContingencyTable> {
        self.support.keys().cloned().collect()
    }
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).fold(1u128, |a, b| a.saturating_mul(b))
}

/// Calls `f` once for every permutation of `0..n` (Heap's algorithm).
pub(crate) fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            f(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Number of composite permutations the oracle must walk for `x`.
pub fn enumeration_size(x: &Dataset) -> u128 {
    x.strata()
        .iter()
        .map(|s| factorial(s.len()))
        .fold(1u128, |a, b| a.saturating_mul(b))
}

/// Exact output law of the mechanism on `x` at rate `p`.
///
/// Strata are permuted independently, so each stratum's law over its own
/// `H × S` slice is enumerated separately and the slices are combined by
/// product. This visits the same composite permutations as a joint
/// enumeration, grouped by stratum.
pub fn exact_psa_distribution(x: &Dataset, p: &BigRational) -> Result<ExactDistribution> {
    if !is_unit_interval(p) {
        return Err(Error::param("p", format!("swap rate must lie in [0, 1], got {p}")));
    }
    let needed = enumeration_size(x);
    if needed > ENUMERATION_LIMIT {
        return Err(Error::EnumerationBudgetExceeded {
            needed,
            limit: ENUMERATION_LIMIT,
        });
    }
    let d = x.domain();
    let width = d.hold_levels * d.swap_levels;
    let records = x.records();

    let mut partial: Vec<(Vec<u64>, BigRational)> = vec![(vec![0; d.cell_count()], BigRational::one())];
    for (m, positions) in x.strata().iter().enumerate() {
        let n = positions.len();
        let mut law: BTreeMap<Vec<u64>, BigRational> = BTreeMap::new();
        let mut weight: Vec<Option<BigRational>> = vec![None; n + 1];
        let mut failure = None;
        for_each_permutation(n, |g| {
            if failure.is_some() {
                return;
            }
            let k = g.iter().enumerate().filter(|&(i, &j)| i != j).count();
            let w = match &weight[k] {
                Some(w) => w.clone(),
                None => match stratum_permutation_prob(k, n, p) {
                    Ok(w) => {
                        weight[k] = Some(w.clone());
                        w
                    }
                    Err(e) => {
                        failure = Some(e);
                        return;
                    }
                },
            };
            if w.is_zero() {
                return;
            }
            let mut slice = vec![0u64; width];
            for (i, &j) in g.iter().enumerate() {
                let h = records[positions[i]].h;
                let s = records[positions[j]].s;
                slice[h * d.swap_levels + s] += 1;
            }
            *law.entry(slice).or_insert_with(BigRational::zero) += w;
        });
        if let Some(e) = failure {
            return Err(e);
        }
        let mut next = Vec::with_capacity(partial.len() * law.len());
        for (counts, w) in &partial {
            for (slice, v) in &law {
                let mut c = counts.clone();
                c[m * width..(m + 1) * width].copy_from_slice(slice);
                next.push((c, w * v));
            }
        }
        partial = next;
    }
    let mut support = BTreeMap::new();
    for (counts, w) in partial {
        let t = ContingencyTable::from_counts(d, counts)?;
        *support.entry(t).or_insert_with(BigRational::zero) += w;
    }
    Ok(ExactDistribution { domain: d, support })
}

/// `max_z max(P(z)/Q(z), Q(z)/P(z))`, or `None` when the supports differ.
pub fn mult_distance_ratio(p: &ExactDistribution, q: &ExactDistribution) -> Option<(BigRational, ContingencyTable)> {
    if p.support.len() != q.support.len() || p.support.keys().ne(q.support.keys()) {
        return None;
    }
    let mut best = (BigRational::one(), None);
    for (t, a) in &p.support {
        let b = &q.support[t];
        let r = if a >= b { a / b } else { b / a };
        if r > best.0 || best.1.is_none() {
            best = (r, Some(t.clone()));
        }
    }
    match best {
        (r, Some(t)) => Some((r, t)),
        (_, None) => Some((BigRational::one(), ContingencyTable::zeros(p.domain))),
    }
}

/// Multiplicative distance `sup_E |ln P(E)/Q(E)|`. For discrete laws the
/// supremum is attained on a single outcome.
pub fn mult_distance(p: &ExactDistribution, q: &ExactDistribution) -> Epsilon {
    match mult_distance_ratio(p, q) {
        None => Epsilon::INFINITY,
        Some((r, _)) => Epsilon::finite(ln_rational(&r)),
    }
}

/// Draws random events over the common support and checks that none has a
/// larger probability ratio than the largest single-outcome ratio.
pub fn event_spot_check(p: &ExactDistribution, q: &ExactDistribution, events: usize, seed: u64) -> bool {
    let Some((atom_max, _)) = mult_distance_ratio(p, q) else {
        return true;
    };
    if p.support.is_empty() {
        return true;
    }
    // Numerators over one common denominator, so event sums stay integral.
    let denom = p
        .support
        .values()
        .chain(q.support.values())
        .fold(BigInt::one(), |l, v| l.lcm(v.denom()));
    let scaled = |v: &BigRational| v.numer() * (&denom / v.denom());
    let atoms: Vec<(BigInt, BigInt)> = p.support.iter().map(|(t, a)| (scaled(a), scaled(&q.support[t]))).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..events {
        let mut pe = BigInt::zero();
        let mut qe = BigInt::zero();
        for (a, b) in &atoms {
            if rng.gen_bool(0.5) {
                pe += a;
                qe += b;
            }
        }
        if pe.is_zero() {
            continue;
        }
        let (hi, lo) = if pe >= qe { (pe, qe) } else { (qe, pe) };
        if hi * atom_max.denom() > lo * atom_max.numer() {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpWitness {
    pub x: ContingencyTable,
    pub x_prime: ContingencyTable,
    /// Outcome attaining the largest ratio, or one outside the other support.
    pub output: ContingencyTable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpVerdict {
    /// Multiplicative distance per unit of Hamming distance.
    pub measured: Epsilon,
    pub bound: Epsilon,
    pub distance: Distance,
    pub witness: DpWitness,
    pub events_consistent: bool,
    pub pass: bool,
}

fn per_unit(distance: &Epsilon, hamming: u64) -> Epsilon {
    if distance.is_infinite() {
        Epsilon::INFINITY
    } else if hamming == 0 {
        if distance.value() == 0.0 {
            Epsilon::ZERO
        } else {
            Epsilon::INFINITY
        }
    } else {
        Epsilon::finite(distance.value() / hamming as f64)
    }
}

fn within(measured: Epsilon, bound: Epsilon) -> bool {
    bound.is_infinite() || (!measured.is_infinite() && measured.value() <= bound.value() + VERDICT_TOLERANCE)
}

fn witness_output(p: &ExactDistribution, q: &ExactDistribution) -> ContingencyTable {
    match mult_distance_ratio(p, q) {
        Some((_, t)) => t,
        None => p
            .support
            .keys()
            .find(|t| !q.support.contains_key(*t))
            .or_else(|| q.support.keys().find(|t| !p.support.contains_key(*t)))
            .cloned()
            .unwrap_or_else(|| ContingencyTable::zeros(p.domain)),
    }
}

/// Compares the exact distance between the output laws of `x` and `x_prime`
/// against `budget × d_Ham(x, x_prime)`.
pub fn verify_dp(x: &Dataset, x_prime: &Dataset, p: &BigRational, budget: Epsilon) -> Result<DpVerdict> {
    if !same_universe(x, x_prime)? {
        return Err(Error::UniverseMismatch);
    }
    let px = exact_psa_distribution(x, p)?;
    let py = exact_psa_distribution(x_prime, p)?;
    Ok(verdict_from(&tabulate(x), &tabulate(x_prime), &px, &py, budget))
}

pub(crate) fn verdict_from(
    tx: &ContingencyTable,
    ty: &ContingencyTable,
    px: &ExactDistribution,
    py: &ExactDistribution,
    budget: Epsilon,
) -> DpVerdict {
    let distance = table_hamming(tx, ty);
    let hamming = distance.finite().expect("same universe implies equal sizes");
    let measured = per_unit(&mult_distance(px, py), hamming);
    let events_consistent = event_spot_check(px, py, SPOT_CHECK_EVENTS, spot_seed(tx, ty));
    DpVerdict {
        measured,
        bound: budget,
        distance,
        witness: DpWitness {
            x: tx.clone(),
            x_prime: ty.clone(),
            output: witness_output(px, py),
        },
        events_consistent,
        pass: events_consistent && within(measured, budget),
    }
}

fn spot_seed(a: &ContingencyTable, b: &ContingencyTable) -> u64 {
    // FNV-1a over both canonical layouts
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in a.canonical_bytes().into_iter().chain(b.canonical_bytes()) {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalEpsilon {
    pub epsilon: Epsilon,
    /// Pair attaining the maximum; `None` for a singleton universe.
    pub witness: Option<DpWitness>,
}

/// The smallest budget the mechanism satisfies on this universe:
/// `max_{x ≠ x'} D_Mult(x, x') / d_Ham(x, x')`.
pub fn measured_optimal_epsilon(universe: &BTreeSet<ContingencyTable>, p: &BigRational) -> Result<OptimalEpsilon> {
    let members: Vec<&ContingencyTable> = universe.iter().collect();
    let laws = members
        .iter()
        .map(|t| exact_psa_distribution(&t.to_dataset(), p))
        .collect::<Result<Vec<_>>>()?;
    Ok(optimal_from_laws(&members, &laws))
}

pub(crate) fn optimal_from_laws(members: &[&ContingencyTable], laws: &[ExactDistribution]) -> OptimalEpsilon {
    let mut best = OptimalEpsilon {
        epsilon: Epsilon::ZERO,
        witness: None,
    };
    for i in 0..members.len() {
        for j in 0..members.len() {
            if i == j {
                continue;
            }
            let hamming = table_hamming(members[i], members[j]).finite().unwrap_or(0);
            let e = per_unit(&mult_distance(&laws[i], &laws[j]), hamming);
            let larger = match (e.is_infinite(), best.epsilon.is_infinite()) {
                (_, true) => false,
                (true, false) => true,
                (false, false) => e.value() > best.epsilon.value(),
            };
            if larger || best.witness.is_none() {
                best = OptimalEpsilon {
                    epsilon: e,
                    witness: Some(DpWitness {
                        x: members[i].clone(),
                        x_prime: members[j].clone(),
                        output: witness_output(&laws[i], &laws[j]),
                    }),
                };
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniverseVerdict {
    pub optimal: OptimalEpsilon,
    /// One verdict per ordered pair of distinct members.
    pub verdicts: Vec<DpVerdict>,
}

impl UniverseVerdict {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// Checks every ordered pair of `universe` against `budget`, computing each
/// member's exact law once.
pub fn verify_universe(universe: &BTreeSet<ContingencyTable>, p: &BigRational, budget: Epsilon) -> Result<UniverseVerdict> {
    let members: Vec<&ContingencyTable> = universe.iter().collect();
    let laws = members
        .iter()
        .map(|t| exact_psa_distribution(&t.to_dataset(), p))
        .collect::<Result<Vec<_>>>()?;
    let mut verdicts = Vec::with_capacity(members.len() * members.len().saturating_sub(1));
    for i in 0..members.len() {
        for j in 0..members.len() {
            if i != j {
                verdicts.push(verdict_from(members[i], members[j], &laws[i], &laws[j], budget));
            }
        }
    }
    Ok(UniverseVerdict {
        optimal: optimal_from_laws(&members, &laws),
        verdicts,
    })
}

/// `b` of the universe containing `t`.
pub fn universe_b(t: &ContingencyTable) -> u64 {
    table_max_stratum_b(t)
}
