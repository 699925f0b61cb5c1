use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A covariance stayed non positive definite after the full jitter ladder.
    #[error("numerical failure in {context}{}", sequence.map(|j| format!(" (sequence {j})")).unwrap_or_default())]
    NumericalFailure {
        context: String,
        sequence: Option<usize>,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numerical(context: impl Into<String>) -> Self {
        Error::NumericalFailure {
            context: context.into(),
            sequence: None,
        }
    }

    /// Tags a numerical failure with the index of the sequence that caused it.
    pub fn in_sequence(self, j: usize) -> Self {
        match self {
            Error::NumericalFailure { context, .. } => Error::NumericalFailure {
                context,
                sequence: Some(j),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
