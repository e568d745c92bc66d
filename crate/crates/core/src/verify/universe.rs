use std::collections::BTreeSet;

use super::ENUMERATION_LIMIT;
use crate::data::{swap_invariants, ContingencyTable, Dataset, SwapInvariants};
use crate::{Error, Result};

/// Every `H × S` table with the given row and column sums, depth first over
/// cells in row-major order. Stops once more than `limit` tables are found.
fn tables_with_margins(rows: &[u64], cols: &[u64], limit: u128) -> Result<Vec<Vec<u64>>> {
    let (h, s) = (rows.len(), cols.len());
    let mut out = Vec::new();
    let mut cell = vec![0u64; h * s];
    let mut row_left = rows.to_vec();
    let mut col_left = cols.to_vec();

    fn walk(
        i: usize,
        s: usize,
        cell: &mut [u64],
        row_left: &mut [u64],
        col_left: &mut [u64],
        out: &mut Vec<Vec<u64>>,
        limit: u128,
    ) -> Result<()> {
        if i == cell.len() {
            if col_left.iter().all(|&c| c == 0) {
                out.push(cell.to_vec());
                if out.len() as u128 > limit {
                    return Err(Error::EnumerationBudgetExceeded {
                        needed: out.len() as u128,
                        limit,
                    });
                }
            }
            return Ok(());
        }
        let (r, c) = (i / s, i % s);
        let cap = row_left[r].min(col_left[c]);
        // the last cell of a row takes whatever the row still needs
        let range = if c + 1 == s {
            if row_left[r] > col_left[c] {
                return Ok(());
            }
            row_left[r]..=row_left[r]
        } else {
            0..=cap
        };
        for v in range {
            cell[i] = v;
            row_left[r] -= v;
            col_left[c] -= v;
            walk(i + 1, s, cell, row_left, col_left, out, limit)?;
            row_left[r] += v;
            col_left[c] += v;
        }
        cell[i] = 0;
        Ok(())
    }

    if rows.iter().sum::<u64>() != cols.iter().sum::<u64>() {
        return Ok(out);
    }
    if h == 0 || s == 0 {
        out.push(Vec::new());
        return Ok(out);
    }
    walk(0, s, &mut cell, &mut row_left, &mut col_left, &mut out, limit)?;
    Ok(out)
}

/// All tables over the domain of `x` that share its swap invariants.
pub fn enumerate_universe(x: &Dataset) -> Result<BTreeSet<ContingencyTable>> {
    universe_of(&swap_invariants(x))
}

pub(crate) fn universe_of(inv: &SwapInvariants) -> Result<BTreeSet<ContingencyTable>> {
    let d = inv.domain;
    let mut per_stratum = Vec::with_capacity(d.match_levels);
    let mut total: u128 = 1;
    for m in 0..d.match_levels {
        let tables = tables_with_margins(inv.mh_row(m), inv.ms_row(m), ENUMERATION_LIMIT)?;
        total = total.saturating_mul(tables.len() as u128);
        if total > ENUMERATION_LIMIT {
            return Err(Error::EnumerationBudgetExceeded {
                needed: total,
                limit: ENUMERATION_LIMIT,
            });
        }
        per_stratum.push(tables);
    }
    let mut partial: Vec<Vec<u64>> = vec![Vec::with_capacity(d.cell_count())];
    for tables in &per_stratum {
        let mut next = Vec::with_capacity(partial.len() * tables.len());
        for prefix in &partial {
            for t in tables {
                let mut counts = prefix.clone();
                counts.extend_from_slice(t);
                next.push(counts);
            }
        }
        partial = next;
    }
    partial
        .into_iter()
        .map(|counts| ContingencyTable::from_counts(d, counts))
        .collect()
}
