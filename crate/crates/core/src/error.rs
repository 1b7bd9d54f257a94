//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible.
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// A forward op produced NaN or infinity.
    #[error("numeric error: non-finite output from `{op}`")]
    Numeric { op: &'static str },

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("input too short: {0}")]
    InputTooShort(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("brute-force oracle too large: {combinations} combinations exceeds {budget}")]
    OracleTooLarge { combinations: u128, budget: u128 },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported model version {found} (reader supports {supported})")]
    Version { found: String, supported: u32 },

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Training diverged; carries the epoch (pre-training or main) where the
    /// loss became non-finite.
    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }
}
