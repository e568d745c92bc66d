//! 2020 Census budget accounting.
//!
//! Constants live in pipe-separated text files (see `data/` in this crate)
//! so that corrections are data edits. The built-in copies are compiled in;
//! [`ZcdpConstants::parse`] and [`SwapStrata::parse`] accept replacements.

use serde::{Deserialize, Serialize};

use super::{compose_zcdp, group_privacy, psa_budget, zcdp_to_approx_dp, ZcdpBudget, CENSUS_DELTA};
use crate::{Epsilon, Error, Result};

pub const BUILTIN_ZCDP: &str = include_str!("../../data/census2020_zcdp.txt");
pub const BUILTIN_STRATA: &str = include_str!("../../data/census2020_psa_strata.txt");

/// Published and formula-derived ε disagreeing by more than this are flagged.
pub const DISCREPANCY_TOLERANCE: f64 = 0.01;

/// The two swap rates of the counterfactual table.
pub const COUNTERFACTUAL_RATES: [f64; 2] = [0.05, 0.50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductBudget {
    pub key: String,
    pub product: String,
    pub mechanism: String,
    pub resolution: String,
    pub rho_squared: f64,
    pub published_epsilon: Option<f64>,
    pub invariants: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZcdpConstants {
    pub products: Vec<ProductBudget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapStratum {
    pub match_var: String,
    pub swap_var: String,
    pub b: u64,
    pub largest_stratum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapStrata {
    pub rows: Vec<SwapStratum>,
}

/// Non-comment, non-blank lines split on `|`, with the header checked and dropped.
fn table_lines<'a>(text: &'a str, header: &[&str]) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, h) = lines.next().ok_or(Error::MalformedConstants {
        line: 0,
        message: "missing header".into(),
    })?;
    let got: Vec<&str> = h.split('|').map(str::trim).collect();
    if got != header {
        return Err(Error::MalformedConstants {
            line: hline,
            message: format!("expected header `{}`", header.join("|")),
        });
    }
    lines
        .map(|(n, l)| {
            let fields: Vec<&str> = l.split('|').map(str::trim).collect();
            if fields.len() != header.len() {
                Err(Error::MalformedConstants {
                    line: n,
                    message: format!("expected {} fields, found {}", header.len(), fields.len()),
                })
            } else {
                Ok((n, fields))
            }
        })
        .collect()
}

fn num<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T> {
    field.parse().map_err(|_| Error::MalformedConstants {
        line,
        message: format!("bad {what} `{field}`"),
    })
}

impl ZcdpConstants {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_ZCDP).expect("built-in constants parse")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let header = [
            "key",
            "product",
            "mechanism",
            "resolution",
            "rho_squared",
            "published_epsilon",
            "invariants",
        ];
        let mut products = Vec::new();
        for (line, f) in table_lines(text, &header)? {
            let rho_squared: f64 = num(line, f[4], "rho_squared")?;
            if rho_squared.is_nan() || rho_squared < 0.0 {
                return Err(Error::MalformedConstants {
                    line,
                    message: "rho_squared must be non-negative".into(),
                });
            }
            let published_epsilon = match f[5] {
                "-" | "" => None,
                v => Some(num(line, v, "published_epsilon")?),
            };
            products.push(ProductBudget {
                key: f[0].to_string(),
                product: f[1].to_string(),
                mechanism: f[2].to_string(),
                resolution: f[3].to_string(),
                rho_squared,
                published_epsilon,
                invariants: f[6].to_string(),
            });
        }
        Ok(ZcdpConstants { products })
    }

    pub fn get(&self, key: &str) -> Result<&ProductBudget> {
        self.products.iter().find(|p| p.key == key).ok_or(Error::MalformedConstants {
            line: 0,
            message: format!("missing product `{key}`"),
        })
    }

    fn budget(&self, key: &str) -> Result<ZcdpBudget> {
        let p = self.get(key)?;
        ZcdpBudget::new(p.product.clone(), p.rho_squared)
    }
}

impl SwapStrata {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_STRATA).expect("built-in strata parse")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let header = ["match", "swap", "b", "largest_stratum"];
        let rows = table_lines(text, &header)?
            .into_iter()
            .map(|(line, f)| {
                Ok(SwapStratum {
                    match_var: f[0].to_string(),
                    swap_var: f[1].to_string(),
                    b: num(line, f[2], "b")?,
                    largest_stratum: f[3].to_string(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(SwapStrata { rows })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductRow {
    pub key: String,
    pub product: String,
    pub mechanism: String,
    pub resolution: String,
    pub rho_squared: f64,
    pub epsilon: f64,
    pub published_epsilon: Option<f64>,
    /// Set when the published ε differs from the formula by more than
    /// [`DISCREPANCY_TOLERANCE`].
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeRow {
    pub label: String,
    pub components: Vec<String>,
    pub rho_squared: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsaRow {
    pub match_var: String,
    pub swap_var: String,
    pub b: u64,
    pub largest_stratum: String,
    /// `(p, ε)` for each of [`COUNTERFACTUAL_RATES`].
    pub budgets: Vec<(f64, Epsilon)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub delta: f64,
    pub products: Vec<ProductRow>,
    pub composites: Vec<CompositeRow>,
    pub psa: Vec<PsaRow>,
}

impl CensusReport {
    pub fn composite(&self, label_prefix: &str) -> Option<&CompositeRow> {
        self.composites.iter().find(|c| c.label.starts_with(label_prefix))
    }

    pub fn product(&self, key: &str) -> Option<&ProductRow> {
        self.products.iter().find(|p| p.key == key)
    }
}

pub fn census2020_report() -> CensusReport {
    census_report(&ZcdpConstants::builtin(), &SwapStrata::builtin()).expect("built-in constants are complete")
}

/// Per-product conversions, composed totals and swapping counterfactuals.
pub fn census_report(constants: &ZcdpConstants, strata: &SwapStrata) -> Result<CensusReport> {
    let delta = CENSUS_DELTA;
    let products = constants
        .products
        .iter()
        .map(|p| {
            let epsilon = zcdp_to_approx_dp(p.rho_squared, delta)?;
            let note = p.published_epsilon.and_then(|published| {
                let gap = (published - epsilon).abs();
                (gap > DISCREPANCY_TOLERANCE).then(|| {
                    format!("published epsilon {published:.2} differs from the conversion formula by {gap:.3}")
                })
            });
            Ok(ProductRow {
                key: p.key.clone(),
                product: p.product.clone(),
                mechanism: p.mechanism.clone(),
                resolution: p.resolution.clone(),
                rho_squared: p.rho_squared,
                epsilon,
                published_epsilon: p.published_epsilon,
                note,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let composite = |label: &str, parts: Vec<ZcdpBudget>| -> Result<CompositeRow> {
        let c = compose_zcdp(&parts);
        Ok(CompositeRow {
            label: label.to_string(),
            components: parts.iter().map(|p| p.label.clone()).collect(),
            rho_squared: c.rho_squared,
            epsilon: zcdp_to_approx_dp(c.rho_squared, delta)?,
        })
    };

    let pl = compose_zcdp(&[constants.budget("pl-household")?, constants.budget("pl-person")?]);
    let pl = ZcdpBudget::new("PL file", pl.rho_squared)?;
    // The DHC run takes the published PL file as input, so its total includes it.
    let tda = compose_zcdp(&[
        constants.budget("dhc-household")?,
        constants.budget("dhc-person")?,
        pl.clone(),
    ]);
    let tda = ZcdpBudget::new("TopDown total", tda.rho_squared)?;
    let overall_parts = vec![
        tda.clone(),
        constants.budget("ddhc-a")?,
        constants.budget("ddhc-b")?,
        constants.budget("s-dhc")?,
    ];
    let overall = ZcdpBudget::new("Overall 2020 DAS", compose_zcdp(&overall_parts).rho_squared)?;
    let doubled = group_privacy(&overall, 2);

    let composites = vec![
        composite(
            "PL file",
            vec![constants.budget("pl-household")?, constants.budget("pl-person")?],
        )?,
        composite(
            "TopDown total",
            vec![
                constants.budget("dhc-household")?,
                constants.budget("dhc-person")?,
                pl,
            ],
        )?,
        composite("Overall 2020 DAS", overall_parts)?,
        CompositeRow {
            label: "Overall 2020 DAS, one duplicated record".to_string(),
            components: vec![doubled.label.clone()],
            rho_squared: doubled.rho_squared,
            epsilon: zcdp_to_approx_dp(doubled.rho_squared, delta)?,
        },
    ];

    let psa = strata
        .rows
        .iter()
        .map(|row| {
            let budgets = COUNTERFACTUAL_RATES
                .iter()
                .map(|&p| Ok((p, psa_budget(p, row.b)?.epsilon)))
                .collect::<Result<Vec<_>>>()?;
            Ok(PsaRow {
                match_var: row.match_var.clone(),
                swap_var: row.swap_var.clone(),
                b: row.b,
                largest_stratum: row.largest_stratum.clone(),
                budgets,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CensusReport {
        delta,
        products,
        composites,
        psa,
    })
}
