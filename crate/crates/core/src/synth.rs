//! Seeded synthetic microdata with controllable stratum sizes.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Domain, Record, Role, RoleConfig, Schema};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StratumShape {
    /// Uniform over hold × swap, with at least two distinct cells when the
    /// stratum has two or more records.
    Mixed,
    /// Every record in one cell.
    Identical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumSpec {
    pub size: usize,
    pub shape: StratumShape,
}

/// `"7"` or `"7:mixed"` for a mixed stratum, `"7:identical"` otherwise.
impl FromStr for StratumSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (size, shape) = s.split_once(':').unwrap_or((s, "mixed"));
        let size = size
            .trim()
            .parse()
            .map_err(|_| Error::param("strata", format!("bad stratum size `{s}`")))?;
        let shape = match shape.trim() {
            "mixed" => StratumShape::Mixed,
            "identical" => StratumShape::Identical,
            other => return Err(Error::param("strata", format!("unknown stratum shape `{other}`"))),
        };
        Ok(StratumSpec { size, shape })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub strata: Vec<StratumSpec>,
    pub hold_levels: usize,
    pub swap_levels: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// All strata mixed.
    pub fn mixed(sizes: Vec<usize>, hold_levels: usize, swap_levels: usize, seed: u64) -> Self {
        SynthSpec {
            strata: sizes
                .into_iter()
                .map(|size| StratumSpec {
                    size,
                    shape: StratumShape::Mixed,
                })
                .collect(),
            hold_levels,
            swap_levels,
            seed,
        }
    }

    pub fn domain(&self) -> Domain {
        Domain::new(self.strata.len(), self.hold_levels, self.swap_levels)
    }

    /// The `b` the generated data will have.
    pub fn expected_b(&self) -> usize {
        self.strata
            .iter()
            .filter(|s| s.shape == StratumShape::Mixed && s.size >= 2)
            .map(|s| s.size)
            .max()
            .unwrap_or(0)
    }
}

pub const MATCH_COLUMN: &str = "match";
pub const HOLD_COLUMN: &str = "hold";
pub const SWAP_COLUMN: &str = "swap";

fn labels(prefix: &str, n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

pub fn schema_for(domain: Domain) -> Schema {
    Schema {
        match_columns: vec![MATCH_COLUMN.into()],
        hold_columns: vec![HOLD_COLUMN.into()],
        swap_columns: vec![SWAP_COLUMN.into()],
        match_labels: labels("m", domain.match_levels),
        hold_labels: labels("h", domain.hold_levels),
        swap_labels: labels("s", domain.swap_levels),
    }
}

/// Role assignment that reads generated files back with the full declared
/// category lists, including categories that never occur.
pub fn role_config_for(domain: Domain) -> RoleConfig {
    let schema = schema_for(domain);
    RoleConfig {
        roles: BTreeMap::from([
            (MATCH_COLUMN.to_string(), Role::Match),
            (HOLD_COLUMN.to_string(), Role::Hold),
            (SWAP_COLUMN.to_string(), Role::Swap),
        ]),
        categories: BTreeMap::from([
            (MATCH_COLUMN.to_string(), schema.match_labels),
            (HOLD_COLUMN.to_string(), schema.hold_labels),
            (SWAP_COLUMN.to_string(), schema.swap_labels),
        ]),
    }
}

pub fn synthesize(spec: &SynthSpec) -> Result<Dataset> {
    let cells = spec.hold_levels * spec.swap_levels;
    if cells == 0 && spec.strata.iter().any(|s| s.size > 0) {
        return Err(Error::param("domain", "hold and swap axes need at least one category"));
    }
    let mixed_needs_two = spec
        .strata
        .iter()
        .any(|s| s.shape == StratumShape::Mixed && s.size >= 2);
    if mixed_needs_two && cells < 2 {
        return Err(Error::param("domain", "a mixed stratum needs at least two hold × swap cells"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let cell = |c: usize, m: usize| Record::new(m, c / spec.swap_levels, c % spec.swap_levels);
    let mut records = Vec::with_capacity(spec.strata.iter().map(|s| s.size).sum());
    for (m, s) in spec.strata.iter().enumerate() {
        match s.shape {
            StratumShape::Identical => {
                if s.size > 0 {
                    let c = rng.gen_range(0..cells);
                    records.extend(std::iter::repeat_n(cell(c, m), s.size));
                }
            }
            StratumShape::Mixed => {
                let start = records.len();
                for _ in 0..s.size {
                    records.push(cell(rng.gen_range(0..cells), m));
                }
                if s.size >= 2 && records[start..].iter().all(|r| *r == records[start]) {
                    let first = records[start];
                    let c = first.h * spec.swap_levels + first.s;
                    records[start + 1] = cell((c + 1 + rng.gen_range(0..cells - 1)) % cells, m);
                }
            }
        }
    }
    let domain = spec.domain();
    Ok(Dataset::new(domain, records)?.with_schema(schema_for(domain)))
}
