use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// One or more configuration fields failed validation. Every problem found is listed.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed PGM: {reason}")]
    Pgm { path: PathBuf, reason: String },

    #[error("{path}: {reason}")]
    Csv { path: PathBuf, reason: String },

    #[error("weights must sum to 1 (got {0})")]
    UnnormalizedWeights(f64),

    #[error("degenerate template: foreground and background means are both {0}")]
    DegenerateTemplate(f64),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short category name, used by the CLI to pick an exit code.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::UnnormalizedWeights(_) | Error::DegenerateTemplate(_) => {
                "config"
            }
            Error::Io { .. } | Error::Pgm { .. } | Error::Csv { .. } => "io",
        }
    }
}
