use std::path::PathBuf;

use thiserror::Error;

use crate::domain::{ClientId, QuantizationLevel};
use crate::profiling::llm::LlmError;
use crate::profiling::script::Slot;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A rejected input, tagged with the field that caused it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid `{field}`: {message}")]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Prefix the field path, e.g. `accuracy` becomes `ratings.accuracy`.
    pub fn within(mut self, parent: &str) -> Self {
        self.field = format!("{parent}.{}", self.field);
        self
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),

    #[error("missing quantization levels: {}", format_levels(.0))]
    MissingLevels(Vec<QuantizationLevel>),

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("unknown {kind} label `{value}`")]
    UnknownLabel { kind: &'static str, value: String },

    #[error("no retrieved case carries positive similarity")]
    NoPrior,

    #[error("no performance data: {0}")]
    NoPerformanceData(String),

    #[error("unknown client `{0}`")]
    UnknownClient(ClientId),

    #[error("no quantity for client `{0}`")]
    MissingQuantity(ClientId),

    #[error("session is finished")]
    SessionFinished,

    #[error("a user reply is required at this point in the interview")]
    ReplyRequired,

    #[error("transcript is missing answers for: {}", format_slots(.0))]
    MissingAnswers(Vec<Slot>),

    #[error("transcript is not an {0} transcript")]
    WrongScenario(&'static str),

    #[error("store I/O failed at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt record in {path} line {line}: {message}")]
    CorruptRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv output failed at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_levels(levels: &[QuantizationLevel]) -> String {
    levels
        .iter()
        .map(|l| l.label())
        .collect::<Vec<_>>()
        .join(", ")
}

fn format_slots(slots: &[Slot]) -> String {
    slots
        .iter()
        .map(|s| s.label())
        .collect::<Vec<_>>()
        .join(", ")
}
