use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SadError {
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{what} of size {size} exceeds the limit {limit}")]
    DiagnosticLimit {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged at epoch {epoch}: non-finite parameters")]
    Diverged { epoch: usize },

    #[error("gibbs chain produced a non-finite state at sweep {sweep}")]
    ChainDiverged { sweep: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset is empty after loading and filtering")]
    EmptyDataset,

    #[error("user {user} has no non-interacted item")]
    NoNegatives { user: usize },

    #[error("user {user} has {available} non-interacted items, {required} required")]
    InsufficientNegatives {
        user: usize,
        available: usize,
        required: usize,
    },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl SadError {
    /// True for errors caused by non-finite numerics during training or sampling.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            SadError::Diverged { .. } | SadError::ChainDiverged { .. } | SadError::Numerical(_)
        )
    }

    /// True for errors originating in input data (parsing, filtering, shapes).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            SadError::Parse { .. }
                | SadError::EmptyDataset
                | SadError::NoNegatives { .. }
                | SadError::InsufficientNegatives { .. }
                | SadError::Checkpoint(_)
                | SadError::ShapeMismatch(_)
                | SadError::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, SadError>;
