//! Optional TOML defaults shared by every subcommand. Flags always take
//! precedence over file values, and file values over the environment.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use permswap::data::{read_csv, Dataset, Role, RoleConfig};
use serde::Deserialize;

use crate::output::Format;

/// Environment variable consulted for the seed when neither a flag nor the
/// config file sets one.
pub const SEED_ENV: &str = "PERMSWAP_SEED";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    #[serde(default)]
    pub roles: BTreeMap<String, Role>,
    #[serde(default)]
    pub categories: BTreeMap<String, Vec<String>>,
}

impl FileConfig {
    /// Relative `input` paths are resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| anyhow!("config {}: {e}", path.display()))?;
        if let (Some(input), Some(dir)) = (&cfg.input, path.parent()) {
            if input.is_relative() {
                cfg.input = Some(dir.join(input));
            }
        }
        if let Some(p) = cfg.p {
            check_rate("p", p).with_context(|| format!("config {}", path.display()))?;
        }
        Ok(cfg)
    }
}

pub fn missing(key: &str) -> anyhow::Error {
    anyhow!("missing required value `{key}`: pass --{key} or set `{key}` in the config file")
}

pub fn check_rate(key: &str, p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(anyhow!("invalid value for `{key}`: swap rate must lie in [0, 1], got {p}"))
    }
}

/// Flag values merged with the config file.
pub struct Resolver {
    file: FileConfig,
}

impl Resolver {
    pub fn new(config: Option<&Path>) -> Result<Self> {
        let file = match config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Ok(Resolver { file })
    }

    pub fn input(&self, flag: Option<&PathBuf>) -> Option<PathBuf> {
        flag.cloned().or_else(|| self.file.input.clone())
    }

    pub fn roles(&self, flag: Option<&PathBuf>) -> Result<RoleConfig> {
        if let Some(path) = flag {
            let text = fs::read_to_string(path).with_context(|| format!("reading roles {}", path.display()))?;
            return RoleConfig::from_toml(&text).with_context(|| format!("roles {}", path.display()));
        }
        let mut roles = if self.file.roles.is_empty() {
            RoleConfig::standard()
        } else {
            RoleConfig {
                roles: self.file.roles.clone(),
                categories: BTreeMap::new(),
            }
        };
        roles.categories = self.file.categories.clone();
        Ok(roles)
    }

    pub fn dataset(&self, input: Option<&PathBuf>, roles: Option<&PathBuf>) -> Result<Dataset> {
        let path = self.input(input).ok_or_else(|| missing("input"))?;
        let roles = self.roles(roles)?;
        let file = fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        read_csv(file, &roles).with_context(|| format!("reading {}", path.display()))
    }

    pub fn p(&self, flag: Option<f64>) -> Result<Option<f64>> {
        flag.or(self.file.p).map(|p| check_rate("p", p)).transpose()
    }

    pub fn seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(seed) = flag.or(self.file.seed) {
            return Ok(seed);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| anyhow!("invalid value for `{SEED_ENV}`: expected an unsigned integer, got `{v}`")),
            Err(_) => Ok(0),
        }
    }

    pub fn format(&self, flag: Option<Format>) -> Format {
        flag.or(self.file.format).unwrap_or_default()
    }
}
