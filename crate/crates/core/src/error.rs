//! Error type shared by every module of the crate.

use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its valid range.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported generator recipe: {0}")]
    UnsupportedRecipe(String),

    /// The observation has zero probability under the current belief.
    #[error("observation z={observation} is impossible under the current belief for action a={action}")]
    ImpossibleObservation { action: usize, observation: usize },

    #[error("inconsistent belief update: {0}")]
    InconsistentUpdate(String),

    #[error("the episode has already reached the final state")]
    EpisodeFinished,

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("model violates {} invariant(s); first: {}", .0.len(), .0.first().map(ToString::to_string).unwrap_or_default())]
    InvalidModel(Vec<Violation>),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsupported file format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("enumeration budget exceeded: {required} leaf evaluations > {budget}")]
    BudgetExceeded { required: f64, budget: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn from_json(err: serde_json::Error) -> Self {
        if err.is_io() {
            return Error::Io(err.into());
        }
        Error::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    /// Coarse failure class, used by the command-line front end to pick an exit code.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_)
            | Error::UnsupportedRecipe(_)
            | Error::ShapeMismatch { .. }
            | Error::InvalidModel(_)
            | Error::Parse { .. }
            | Error::VersionMismatch { .. }
            | Error::BudgetExceeded { .. } => ErrorKind::Config,
            Error::ImpossibleObservation { .. }
            | Error::InconsistentUpdate(_)
            | Error::EpisodeFinished
            | Error::Numeric(_) => ErrorKind::Numeric,
            Error::Io(_) | Error::Csv(_) => ErrorKind::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numeric,
    Io,
}
