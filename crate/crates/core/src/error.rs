use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("domain mismatch: {left:?} vs {right:?}")]
    DomainMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },

    #[error("column `{0}` has no role assigned")]
    UnassignedColumn(String),

    #[error("role config names column `{0}` which is not in the input")]
    UnknownColumn(String),

    #[error("invalid role assignment: {0}")]
    InvalidRoles(String),

    #[error("row {row}: value `{value}` in column `{column}` is not a declared category")]
    UnknownCategory {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("record {index} lies outside the domain {domain:?}")]
    RecordOutOfDomain {
        index: usize,
        domain: (usize, usize, usize),
    },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("datasets are not in the same universe")]
    UniverseMismatch,

    #[error("enumeration budget exceeded: {needed} > {limit}")]
    EnumerationBudgetExceeded { needed: u128, limit: u128 },

    #[error("malformed constants file, line {line}: {message}")]
    MalformedConstants { line: usize, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}
