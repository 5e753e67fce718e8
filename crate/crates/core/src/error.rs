use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure in {stage}: {detail}")]
    NumericalFailure { stage: &'static str, detail: String },
    /// The integrand has no finite mass over the real line.
    #[error("integrand is not normalizable: {0}")]
    NotNormalizable(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(stage: &'static str, detail: impl Into<String>) -> Self {
        Error::NumericalFailure {
            stage,
            detail: detail.into(),
        }
    }

    /// Prefix the error detail with caller context (run, slot, agent...).
    pub fn with_context(self, ctx: &str) -> Self {
        use alloc::format;
        match self {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{ctx}: {m}")),
            Error::NumericalFailure { stage, detail } => Error::NumericalFailure {
                stage,
                detail: format!("{ctx}: {detail}"),
            },
            Error::NotNormalizable(m) => Error::NotNormalizable(format!("{ctx}: {m}")),
        }
    }
}
