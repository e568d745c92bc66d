use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::budget::{log_derangement_ratio, LowerBound, LowerBoundKind};
use crate::data::{table_max_stratum_b, ContingencyTable};
use crate::rational::to_f64;
use crate::Epsilon;

/// Lower bounds on the optimal budget that are witnessed inside the
/// universe of `t`, so that `measured_optimal_epsilon` must meet each one.
///
/// * Degenerate rate: at `p = 0` any universe with two members; at `p = 1`
///   a stratum of exactly two records with distinct hold and swap values.
/// * Odds: a stratum of at least two records in which every hold and swap
///   margin is 0 or 1.
/// * Derangement ratio: a stratum of size `b` whose hold and swap margins
///   are all at most `b/2 − 1`, with at least two hold and two swap values
///   of margin 1 (`b >= 4`); or, for `b = 2` and `p <= 1/2`, the stratum of
///   two records with distinct hold and swap values.
pub fn applicable_lower_bounds(t: &ContingencyTable, universe_size: usize, p: &BigRational) -> Vec<LowerBound> {
    let inv = t.invariants();
    let d = t.domain();
    let strata: Vec<(u64, &[u64], &[u64])> = (0..d.match_levels)
        .map(|m| (t.stratum_size(m), inv.mh_row(m), inv.ms_row(m)))
        .collect();
    let b = table_max_stratum_b(t);
    let mut out = Vec::new();

    let distinct_pair = |(n, mh, ms): &(u64, &[u64], &[u64])| {
        *n == 2 && mh.iter().all(|&c| c <= 1) && ms.iter().all(|&c| c <= 1)
    };

    if p.is_zero() || p.is_one() {
        let witnessed = if p.is_zero() {
            universe_size >= 2
        } else {
            strata.iter().any(distinct_pair)
        };
        if witnessed {
            out.push(LowerBound {
                kind: LowerBoundKind::DegenerateRate,
                value: Epsilon::INFINITY,
                requires: "two distinct members at p = 0, or a two-record stratum at p = 1",
            });
        }
        return out;
    }

    let pf = to_f64(p);
    let ln_o = (pf / (1.0 - pf)).ln();

    if strata
        .iter()
        .any(|(n, mh, ms)| *n >= 2 && mh.iter().all(|&c| c <= 1) && ms.iter().all(|&c| c <= 1))
    {
        out.push(LowerBound {
            kind: LowerBoundKind::Odds,
            value: Epsilon::finite(ln_o),
            requires: "a stratum with every hold and swap margin at most 1",
        });
    }

    let ratio_witness = b >= 4
        && strata.iter().any(|(n, mh, ms)| {
            let cap = b / 2 - 1;
            *n == b
                && mh.iter().all(|&c| c <= cap)
                && ms.iter().all(|&c| c <= cap)
                && mh.iter().filter(|&&c| c == 1).count() >= 2
                && ms.iter().filter(|&&c| c == 1).count() >= 2
        });
    let half = BigRational::new(1.into(), 2.into());
    let pair_witness = b == 2 && *p <= half && strata.iter().any(distinct_pair);
    if ratio_witness || pair_witness {
        let ratio = log_derangement_ratio(b).expect("b >= 2");
        out.push(LowerBound {
            kind: LowerBoundKind::DerangementRatio,
            value: Epsilon::finite(0.5 * ratio - ln_o),
            requires: if pair_witness {
                "b = 2, p <= 1/2, a two-record stratum with distinct values"
            } else {
                "a stratum of size b with margins at most b/2 - 1 and two unit margins per axis"
            },
        });
    }
    out
}
