//! Error type shared by every module, with the CLI exit-code mapping.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error in {file} at line {line}: {field}")]
    Schema {
        file: String,
        line: usize,
        field: String,
    },
    #[error("duplicate instance id {0:?}")]
    DuplicateId(String),
    #[error("instance id {0:?} not found in the instances file")]
    UnknownInstance(String),
    #[error("dataset contains no instances")]
    EmptyDataset,
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("references must be non-empty")]
    EmptyReferences,
    #[error("continuation must be non-empty")]
    EmptyContinuation,
    #[error("{rule} selection requires {field} on candidate {index}")]
    MissingScore {
        rule: String,
        field: String,
        index: usize,
    },
    #[error("lambda {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("alpha {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("no binding for placeholder {{{0}}}")]
    MissingPlaceholder(String),
    #[error("decoding method {0:?} is not supported by this backend")]
    UnsupportedDecoding(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("prompt exceeds the backend context window")]
    TokenizationOverflow,
    #[error("grid must be non-empty")]
    GridEmpty,
    #[error("invalid {what}: {why}")]
    InvalidConfig { what: String, why: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(what: impl Into<String>, why: impl Into<String>) -> Self {
        Error::InvalidConfig {
            what: what.into(),
            why: why.into(),
        }
    }

    /// Stable machine-readable name for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema { .. } => "schema",
            Error::DuplicateId(_) => "duplicate_id",
            Error::UnknownInstance(_) => "unknown_instance",
            Error::EmptyDataset => "empty_dataset",
            Error::EmptyPool => "empty_pool",
            Error::EmptyReferences => "empty_references",
            Error::EmptyContinuation => "empty_continuation",
            Error::MissingScore { .. } => "missing_score",
            Error::LambdaOutOfRange(_) => "lambda_out_of_range",
            Error::AlphaOutOfRange(_) => "alpha_out_of_range",
            Error::MissingPlaceholder(_) => "missing_placeholder",
            Error::UnsupportedDecoding(_) => "unsupported_decoding",
            Error::BackendUnavailable(_) => "backend_unavailable",
            Error::TokenizationOverflow => "tokenization_overflow",
            Error::GridEmpty => "grid_empty",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::Io { .. } => "io",
        }
    }

    /// CLI exit codes: 2 schema, 3 backend, 4 precondition violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema { .. } | Error::DuplicateId(_) | Error::UnknownInstance(_) => 2,
            Error::BackendUnavailable(_) | Error::TokenizationOverflow => 3,
            _ => 4,
        }
    }

    /// One-line JSON record for standard error.
    pub fn stderr_record(&self) -> serde_json::Value {
        let mut record = serde_json::json!({
            "error": self.code(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let Error::Schema { file, line, .. } = self {
            record["file"] = serde_json::json!(file);
            record["line"] = serde_json::json!(line);
        }
        if let Error::Io { path, .. } = self {
            record["file"] = serde_json::json!(path.display().to_string());
        }
        record
    }
}
