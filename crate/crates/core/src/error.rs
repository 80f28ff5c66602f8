//! Crate-wide error type.
//!
//! Variants are grouped by the stage that raises them so callers can match on
//! the failure class without string inspection. Provider/transport failures
//! carry their own sub-enum because the retry loop dispatches on them.

use std::fmt;
use std::io;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// I/O failure, with the offending path when known.
    Io { path: Option<PathBuf>, source: io::Error },
    /// CSV-level parse or write failure.
    Csv(csv::Error),
    /// JSON (de)serialization failure.
    Json(serde_json::Error),
    /// TOML deserialization failure.
    Toml(toml::de::Error),
    /// Malformed tabular input: ragged rows, empty files, bad schema hints.
    Ingest(String),
    /// Dataset-level invariant violation (shape, target count, cell codes).
    Schema(String),
    /// Fold assignment cannot satisfy the request (k out of range).
    Folds(String),
    /// Normalizer fit over a column with no observed values.
    Normalization(String),
    /// Amputation spec cannot be realized (quota exceeds observed cells, ...).
    Amputation(String),
    /// Imputer misuse or unimputable input.
    Impute(String),
    /// Metric preconditions violated (degenerate ranges, unimputed cells).
    Metric(String),
    /// Run or imputer configuration rejected before work starts.
    Config(String),
    /// Transport-level failure talking to a provider.
    Provider(ProviderError),
    /// Usage ledger holds inconsistent accounting (negative tokens, ...).
    Ledger(String),
}

/// Transport failures, each retryable by the pipeline and disjoint from
/// content-invalid verdicts (which are data, not errors).
#[derive(Debug)]
pub enum ProviderError {
    Timeout,
    ConnectionRefused,
    RateLimited,
    Http { status: u16, message: String },
    Protocol(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io { path: Some(p), source } => write!(f, "io error on {}: {source}", p.display()),
            Error::Io { path: None, source } => write!(f, "io error: {source}"),
            Error::Csv(e) => write!(f, "csv error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
            Error::Toml(e) => write!(f, "toml error: {e}"),
            Error::Ingest(msg) => write!(f, "ingestion error: {msg}"),
            Error::Schema(msg) => write!(f, "schema error: {msg}"),
            Error::Folds(msg) => write!(f, "fold assignment error: {msg}"),
            Error::Normalization(msg) => write!(f, "normalization error: {msg}"),
            Error::Amputation(msg) => write!(f, "amputation error: {msg}"),
            Error::Impute(msg) => write!(f, "imputation error: {msg}"),
            Error::Metric(msg) => write!(f, "metric error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Provider(e) => write!(f, "provider error: {e}"),
            Error::Ledger(msg) => write!(f, "ledger error: {msg}"),
        }
    }
}

impl fmt::Display for ProviderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderError::Timeout => write!(f, "request timed out"),
            ProviderError::ConnectionRefused => write!(f, "connection refused"),
            ProviderError::RateLimited => write!(f, "rate limited"),
            ProviderError::Http { status, message } => write!(f, "http {status}: {message}"),
            ProviderError::Protocol(msg) => write!(f, "malformed provider response: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            Error::Csv(e) => Some(e),
            Error::Json(e) => Some(e),
            Error::Toml(e) => Some(e),
            _ => None,
        }
    }
}

impl std::error::Error for ProviderError {}

impl From<io::Error> for Error {
    fn from(source: io::Error) -> Self {
        Error::Io { path: None, source }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Toml(e)
    }
}

impl Error {
    /// Attaches a path to a bare I/O error; other variants pass through.
    pub fn with_path(self, path: impl Into<PathBuf>) -> Self {
        match self {
            Error::Io { path: None, source } => Error::Io { path: Some(path.into()), source },
            other => other,
        }
    }
}
