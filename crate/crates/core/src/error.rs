use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// One or more parameter invariants are violated; every violation is listed.
    #[error("invalid parameters: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// Every EM start collapsed; carries one diagnostic line per start.
    #[error("all {} starts degenerate: {}", .0.len(), .0.join(" | "))]
    AllStartsDegenerate(Vec<String>),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Validation(_) => "validation",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Numerical(_) => "numerical",
            Error::Quadrature(_) => "quadrature",
            Error::AllStartsDegenerate(_) => "all_starts_degenerate",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
