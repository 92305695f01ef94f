use thiserror::Error;

/// Errors raised by the numerical engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot parse `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("gauge domain violated: increments may reach {bound} (must stay below 1)")]
    GaugeDomain { bound: f64 },

    #[error("level {requested} exceeds the cap of {cap}")]
    LevelCap { requested: u32, cap: u32 },

    #[error("tolerance {tolerance:e} unreachable below max level {max_level}")]
    ToleranceUnreachable { tolerance: f64, max_level: u32 },

    #[error("coefficients beta_0..beta_{n} are not all equal; use the enumeration or Monte Carlo engine")]
    UnequalPrefix { n: u32 },

    #[error("beta_{index} = {value} is negative; the coupling requires nonnegative coefficients")]
    NegativeCoefficient { index: u32, value: f64 },

    #[error("s_n^2 does not converge (infinite total variation regime)")]
    InfiniteVariation,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
