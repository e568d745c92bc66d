//! CSV ingestion and role cross-classification.
//!
//! Dialect: comma separated, UTF-8, header row required, no quoting. A field
//! containing a comma therefore shows up as a ragged row and is rejected.
//! Lines starting with `#` are comments.
//!
//! Columns sharing a role are collapsed into one axis in header order, with
//! the first column most significant: for levels `L1, L2, ...` the index of
//! `(i1, i2, ...)` is `(i1 * L2 + i2) * L3 + ...`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Dataset, Domain, Record, Schema};
use crate::{Error, Result};

/// Separator used when composing labels of multi-column axes.
const LABEL_JOIN: &str = "|";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Match,
    Hold,
    Swap,
}

/// Column-to-role assignment, optionally with a declared category list per
/// column. Columns without a declared list take the sorted set of values
/// observed in the data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoleConfig {
    pub roles: BTreeMap<String, Role>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub categories: BTreeMap<String, Vec<String>>,
}

impl RoleConfig {
    /// Columns named `match`, `hold` and `swap`, with inferred categories.
    pub fn standard() -> Self {
        RoleConfig {
            roles: BTreeMap::from([
                ("match".to_string(), Role::Match),
                ("hold".to_string(), Role::Hold),
                ("swap".to_string(), Role::Swap),
            ]),
            categories: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("role config always serializes")
    }
}

struct Axis {
    columns: Vec<usize>,
    names: Vec<String>,
    levels: Vec<Vec<String>>,
}

impl Axis {
    fn size(&self) -> usize {
        self.levels.iter().map(Vec::len).product()
    }

    fn labels(&self) -> Vec<String> {
        let mut out = vec![String::new()];
        for (k, lv) in self.levels.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * lv.len());
            for prefix in &out {
                for l in lv {
                    if k == 0 {
                        next.push(l.clone());
                    } else {
                        next.push(format!("{prefix}{LABEL_JOIN}{l}"));
                    }
                }
            }
            out = next;
        }
        out
    }
}

/// Collapse raw categorical columns into a `(match, hold, swap)` dataset.
///
/// An empty match role yields a single constant stratum.
pub fn cross_classify(header: &[String], rows: &[Vec<String>], config: &RoleConfig) -> Result<Dataset> {
    for name in config.roles.keys().chain(config.categories.keys()) {
        if !header.contains(name) {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }
    let mut roles = Vec::with_capacity(header.len());
    for name in header {
        match config.roles.get(name) {
            Some(role) => roles.push(*role),
            None => return Err(Error::UnassignedColumn(name.clone())),
        }
    }
    let seen: BTreeSet<&String> = header.iter().collect();
    if seen.len() != header.len() {
        return Err(Error::InvalidRoles("duplicate column names in header".into()));
    }
    if !roles.contains(&Role::Hold) {
        return Err(Error::InvalidRoles("no column has role `hold`".into()));
    }
    if !roles.contains(&Role::Swap) {
        return Err(Error::InvalidRoles("no column has role `swap`".into()));
    }

    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::MalformedRow {
                row: i + 1,
                message: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
    }

    let levels: Vec<Vec<String>> = header
        .iter()
        .enumerate()
        .map(|(c, name)| match config.categories.get(name) {
            Some(declared) => declared.clone(),
            None => rows
                .iter()
                .map(|r| r[c].clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        })
        .collect();

    let axis = |role: Role| {
        let columns: Vec<usize> = (0..header.len()).filter(|&c| roles[c] == role).collect();
        Axis {
            names: columns.iter().map(|&c| header[c].clone()).collect(),
            levels: columns.iter().map(|&c| levels[c].clone()).collect(),
            columns,
        }
    };
    let (match_axis, hold_axis, swap_axis) = (axis(Role::Match), axis(Role::Hold), axis(Role::Swap));

    let index_maps: Vec<BTreeMap<&str, usize>> = levels
        .iter()
        .map(|lv| lv.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect())
        .collect();

    let encode = |axis: &Axis, row: &[String], row_no: usize| -> Result<usize> {
        let mut idx = 0usize;
        for (k, &c) in axis.columns.iter().enumerate() {
            let value = &row[c];
            let pos = *index_maps[c].get(value.as_str()).ok_or_else(|| Error::UnknownCategory {
                row: row_no,
                column: header[c].clone(),
                value: value.clone(),
            })?;
            idx = idx * axis.levels[k].len() + pos;
        }
        Ok(idx)
    };

    let mut records = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        records.push(Record::new(
            encode(&match_axis, row, i + 1)?,
            encode(&hold_axis, row, i + 1)?,
            encode(&swap_axis, row, i + 1)?,
        ));
    }

    let domain = Domain::new(match_axis.size(), hold_axis.size(), swap_axis.size());
    let schema = Schema {
        match_labels: match_axis.labels(),
        hold_labels: hold_axis.labels(),
        swap_labels: swap_axis.labels(),
        match_columns: match_axis.names,
        hold_columns: hold_axis.names,
        swap_columns: swap_axis.names,
    };
    Ok(Dataset::new(domain, records)?.with_schema(schema))
}

fn reader_builder() -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.has_headers(true)
        .quoting(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::None);
    b
}

/// Read a CSV dataset and cross-classify it according to `config`.
pub fn read_csv<R: Read>(reader: R, config: &RoleConfig) -> Result<Dataset> {
    let mut rdr = reader_builder().from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(str::to_owned).collect());
    }
    cross_classify(&header, &rows, config)
}

/// Write `x` as a three-column `match,hold,swap` CSV using its axis labels,
/// or bare indices when it carries no schema.
pub fn write_csv<W: Write>(x: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(writer);
    let (mcol, hcol, scol) = match x.schema() {
        Some(s) if s.match_columns.len() <= 1 && s.hold_columns.len() == 1 && s.swap_columns.len() == 1 => (
            s.match_columns.first().cloned().unwrap_or_else(|| "match".into()),
            s.hold_columns[0].clone(),
            s.swap_columns[0].clone(),
        ),
        _ => ("match".into(), "hold".into(), "swap".into()),
    };
    w.write_record([mcol, hcol, scol])?;
    let label = |labels: Option<&Vec<String>>, i: usize| match labels {
        Some(l) => l[i].clone(),
        None => i.to_string(),
    };
    let schema = x.schema();
    for r in x.records() {
        w.write_record([
            label(schema.map(|s| &s.match_labels), r.m),
            label(schema.map(|s| &s.hold_labels), r.h),
            label(schema.map(|s| &s.swap_labels), r.s),
        ])?;
    }
    w.flush()?;
    Ok(())
}
