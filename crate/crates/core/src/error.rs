use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum UqError {
    /// A probability vector, kernel row or table failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// A measure or aggregator parameter lies outside its domain.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Scenario or run configuration is incomplete or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A trajectory does not replay against the system it claims to come from.
    #[error("structural error: {0}")]
    Structural(String),

    /// Exhaustive enumeration would exceed the configured cap.
    #[error("enumeration refused: estimated {estimated} trajectories exceeds cap {cap}")]
    EnumerationCap { estimated: u128, cap: u128 },

    /// A conditioning event or realized event has zero probability.
    #[error("zero-probability event: {0}")]
    ZeroProbability(String),

    #[error("unknown axis `{0}`")]
    UnknownAxis(String),

    /// `q` puts mass on a symbol where the reference `p` has none.
    #[error("absolute continuity violated at symbol {0}")]
    AbsoluteContinuity(usize),

    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },

    /// Input is too degenerate for the requested statistic.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Scenario file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, UqError>;

impl From<std::io::Error> for UqError {
    fn from(e: std::io::Error) -> Self {
        UqError::Io(e.to_string())
    }
}
