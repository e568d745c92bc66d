use crate::data::{same_universe, tabulate, ContingencyTable, Dataset};
use crate::psa::Permutation;
use crate::{Error, Result};

/// A permutation of swap values taking `x` to a reordering of `x_prime`
/// that moves exactly `d_Ham(x, x_prime)` records.
///
/// Only records in cells where `x` has more records than `x_prime` are
/// touched. While the tables differ, pick an over-full cell `(h1, s1)`, a
/// short cell `(h2, s1)` in the same column and an over-full cell
/// `(h2, s2)` in that row, then exchange the swap values of one excess
/// record in each over-full cell.
pub fn connecting_permutation(x: &Dataset, x_prime: &Dataset) -> Result<Permutation> {
    if x.len() != x_prime.len() {
        return Err(Error::param("x_prime", "datasets differ in size"));
    }
    if !same_universe(x, x_prime)? {
        return Err(Error::UniverseMismatch);
    }
    let d = x.domain();
    let (hl, sl) = (d.hold_levels, d.swap_levels);
    let target = tabulate(x_prime);
    let source = tabulate(x);
    let mut diff: Vec<i64> = source
        .counts()
        .iter()
        .zip(target.counts())
        .map(|(&a, &b)| a as i64 - b as i64)
        .collect();

    // excess[cell] holds positions currently in `cell` that must move
    let mut excess: Vec<Vec<usize>> = vec![Vec::new(); d.cell_count()];
    for (i, r) in x.records().iter().enumerate() {
        let c = d.cell_index(r.m, r.h, r.s);
        if (excess[c].len() as i64) < diff[c] {
            excess[c].push(i);
        }
    }

    let mut g = Permutation::identity(x.len());
    while let Some(c11) = diff.iter().position(|&a| a > 0) {
        let m = c11 / (hl * sl);
        let (h1, s1) = ((c11 / sl) % hl, c11 % sl);
        let cell = |h: usize, s: usize| d.cell_index(m, h, s);
        let h2 = (0..hl)
            .find(|&h| diff[cell(h, s1)] < 0)
            .expect("equal swap margins leave a short cell in the column");
        let s2 = (0..sl)
            .find(|&s| diff[cell(h2, s)] > 0)
            .expect("equal hold margins leave an over-full cell in the row");
        let a = excess[c11].pop().expect("excess tracks positive difference");
        let b = excess[cell(h2, s2)].pop().expect("excess tracks positive difference");
        g.transpose(a, b);
        for (h, s, delta) in [(h1, s1, -1), (h2, s2, -1), (h1, s2, 1), (h2, s1, 1)] {
            diff[cell(h, s)] += delta;
        }
        // a now sits in (h1, s2), b in (h2, s1)
        if diff[cell(h1, s2)] > 0 {
            excess[cell(h1, s2)].push(a);
        }
        if diff[cell(h2, s1)] > 0 {
            excess[cell(h2, s1)].push(b);
        }
    }
    Ok(g)
}

/// Whether `g` connects `x` to `target` while moving exactly `moves` records.
pub fn validates(g: &Permutation, x: &Dataset, target: &ContingencyTable, moves: u64) -> bool {
    g.derange_count() as u64 == moves && g.apply(x).map(|z| tabulate(&z) == *target).unwrap_or(false)
}
