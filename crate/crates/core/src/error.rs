use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("player index {index} out of range for {players} players")]
    PlayerIndex { index: usize, players: usize },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("grid of {points} points exceeds the limit of {limit}")]
    GridTooLarge { points: u128, limit: u128 },

    #[error("missing oracle: {0}")]
    MissingOracle(&'static str),

    #[error("expected cost of player {0} is not piecewise linear")]
    NotPiecewiseLinear(usize),

    #[error("degenerate probes: {0}")]
    DegenerateProbes(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("config field `{field}`: {reason}")]
    ConfigField { field: String, reason: String },

    #[error("budget too small: {0}")]
    BudgetTooSmall(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigField {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by user input rather than by a failing computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ConfigParse(_)
                | Error::ConfigField { .. }
                | Error::InvalidArgument { .. }
                | Error::Dimension { .. }
                | Error::PlayerIndex { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
