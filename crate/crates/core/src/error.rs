use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("invalid parameter `{name}`: {constraint}")]
    InvalidParameter { name: String, constraint: String },

    #[error("every sampled triple had a zero denominator")]
    AllDenominatorsZero,

    #[error(
        "no n <= {n_max} with phi^n(eps) strictly below eps/(2s); phi^{n_max}(eps) = {last_value}"
    )]
    NTildeNotFound { n_max: usize, last_value: f64 },

    #[error("no {witness} within the horizon; condition fails at index {blocking_index}")]
    WitnessNotFound {
        witness: &'static str,
        blocking_index: usize,
    },

    #[error("orbit too short: need index {needed}, orbit ends at {available}")]
    OrbitTooShort { needed: usize, available: usize },

    #[error("orbit left the finite range at index {index}")]
    OrbitOverflow { index: usize },

    #[error("ball rejection sampling acceptance rate {rate:.2e} is below 1e-3; use a tighter proposal scale")]
    LowAcceptance { rate: f64 },

    #[error("hypothesis check `{stage}` failed: {diagnostic}")]
    HypothesisFailed { stage: String, diagnostic: String },

    #[error("fixed-point solve did not converge")]
    NotConverged,

    #[error("config syntax error at line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("config error in `{field}`: {constraint}")]
    ConfigSemantic { field: String, constraint: String },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            constraint: constraint.into(),
        }
    }

    pub(crate) fn semantic(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::ConfigSemantic {
            field: field.into(),
            constraint: constraint.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
