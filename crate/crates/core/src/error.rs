use std::path::PathBuf;

use thiserror::Error;

use crate::model::ComponentRef;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error: {0}")]
    Syntax(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("log integrity violated: {}", .0.join("; "))]
    Integrity(Vec<String>),

    #[error("unknown component {0}")]
    UnknownComponent(ComponentRef),

    #[error("unknown scope {0:?}")]
    UnknownScope(String),

    #[error("unknown unit {0:?}")]
    UnknownUnit(String),

    #[error("no conversion path from {from:?} to {to:?}")]
    NoConversionPath { from: String, to: String },

    #[error("inconsistent unit registry: {0}")]
    InconsistentRegistry(String),

    #[error("flow {flow:?} in {unit:?} cannot be converted to any characterized unit")]
    UnitMismatch { flow: String, unit: String },

    #[error("uncharacterized flow {flow:?} ({unit})")]
    UncharacterizedFlow { flow: String, unit: String },

    #[error("functional unit object type {0:?} has zero measured output")]
    ZeroOutput(String),

    #[error("allocation rule for {0} selects no targets")]
    NoTargets(ComponentRef),

    #[error("{target} lacks numeric attribute {attribute:?}")]
    MissingAttribute { target: String, attribute: String },

    #[error("allocation target {target} has negative key value for {attribute:?}")]
    NegativeKey { target: String, attribute: String },

    #[error("more than one allocation rule for source {0}")]
    DuplicateSource(ComponentRef),

    #[error("results were computed on a different log (expected digest {expected}, found {found})")]
    LogMismatch { expected: String, found: String },

    #[error("fixture {0} is missing")]
    MissingFixture(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Environment-level failures (I/O, unreadable input) as opposed to data errors.
    pub fn is_environmental(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Syntax(_) | Error::MissingFixture(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match err.classify() {
            Category::Syntax | Category::Eof => Error::Syntax(err.to_string()),
            Category::Data => Error::Schema(err.to_string()),
            Category::Io => Error::Io(err.into()),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Schema(format!("{other:?}")),
        }
    }
}
