use thiserror::Error;

/// Errors raised by the laboratory.
///
/// The variants are grouped by what went wrong so that front ends can map
/// them onto exit codes: bad input (`InvalidSpec`, `InvalidArgument`,
/// `OffGrid`, `Config`), a tripped numerical guard (`Cfl`,
/// `DomainTooNarrow`, `ControlOutOfBand`), or plain I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid volatility band: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {time} is not aligned to the grid (step {step})")]
    OffGrid { time: f64, step: f64 },

    #[error("control emitted sigma {sigma} outside [{lo}, {hi}]")]
    ControlOutOfBand { sigma: f64, lo: f64, hi: f64 },

    #[error("CFL violated: dt {dt} exceeds dx^2 / sigma_hi^2 = {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("domain too narrow: boundary moves the center value by {influence:.3e} (tolerance {tolerance:.1e})")]
    DomainTooNarrow { influence: f64, tolerance: f64 },

    #[error("empty control family")]
    EmptyFamily,

    #[error("functional `{name}` failed: {reason}")]
    Functional { name: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by a numerical safety guard rather than bad input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::Cfl { .. } | Error::DomainTooNarrow { .. } | Error::ControlOutOfBand { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
