use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("every instrument column is degenerate after partialling")]
    DegenerateInstruments,
    #[error("instrument matrix has numerical rank zero")]
    ZeroRank,
    #[error("refusing to materialise a {n}x{n} projection (threshold {threshold})")]
    Resource { n: usize, threshold: usize },
    #[error("ridge projection is diagonal for every admissible penalty")]
    DiagonalProjection,
    #[error("variance estimate is not positive ({0:e})")]
    DegenerateVariance(f64),
    #[error("balanced design violated: {0}")]
    BalancedDesign(String),
    #[error("{test} not applicable: {reason}")]
    NotApplicable { test: &'static str, reason: String },
    #[error("instrument column {0} has zero score variance")]
    DegenerateColumn(usize),
    #[error("positive concentration requested with an all-zero signal pattern")]
    DegenerateSignal,
    #[error("invalid simulation config: {0}")]
    Config(String),
}

impl Error {
    /// Stable upper-case tag used by the command line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "DIMENSION",
            Error::NonFinite(_) => "NON_FINITE",
            Error::Domain(_) => "DOMAIN",
            Error::DegenerateInstruments => "DEGENERATE_INSTRUMENTS",
            Error::ZeroRank => "ZERO_RANK",
            Error::Resource { .. } => "RESOURCE",
            Error::DiagonalProjection => "DIAGONAL_PROJECTION",
            Error::DegenerateVariance(_) => "DEGENERATE_VARIANCE",
            Error::BalancedDesign(_) => "BALANCED_DESIGN",
            Error::NotApplicable { .. } => "NOT_APPLICABLE",
            Error::DegenerateColumn(_) => "DEGENERATE_COLUMN",
            Error::DegenerateSignal => "DEGENERATE_SIGNAL",
            Error::Config(_) => "INVALID_CONFIG",
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
