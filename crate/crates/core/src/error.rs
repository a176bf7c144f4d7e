use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{field} = {value} is out of range: {reason}")]
    OutOfRange {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A stability product `eta * r * sigma^2` reached 2 without the divergence-study flag.
    #[error("{which} = {gamma} >= 2: online SGD diverges (set divergence_study to allow)")]
    Divergent { which: &'static str, gamma: f64 },

    #[error("r = {r} cannot be quantized to an integer block size for n = {n}")]
    Unquantizable { r: f64, n: usize },

    /// Weights or order parameters left the double range.
    #[error("non-finite state at step {step} of phase {phase}")]
    NonFinite { phase: u8, step: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A report failed one of its hard consistency gates.
    #[error("hard gate failed: {0}")]
    HardGate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors produced while validating a configuration.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::OutOfRange { .. }
                | Error::Divergent { .. }
                | Error::Unquantizable { .. }
                | Error::InvalidArgument(_)
                | Error::Json(_)
        )
    }
}
