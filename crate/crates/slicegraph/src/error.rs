use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Pipeline stage an error came from; printed as a prefix so a failing run
/// says where it stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Extract,
    Normalize,
    Graph,
    Embed,
    Train,
    Eval,
    Predict,
    Synthetic,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Extract => "extract",
            Stage::Normalize => "normalize",
            Stage::Graph => "build-graph",
            Stage::Embed => "embed",
            Stage::Train => "train",
            Stage::Eval => "eval",
            Stage::Predict => "predict",
            Stage::Synthetic => "gen-synthetic",
        })
    }
}

/// A malformed input file, with the 1-based line of the problem.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}:{line}: {message}")]
pub struct ParseError {
    pub path: String,
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(path: &Path, line: usize, message: impl Into<String>) -> Self {
        Self { path: path.display().to_string(), line, message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Parse(#[from] ParseError),
    /// Inputs that are well-formed but violate a contract (missing
    /// embedding, empty corpus, dimension mismatch, ...).
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Usage(String),
    /// Training produced a non-finite loss.
    #[error("{0}")]
    Diverged(String),
    #[error("{stage}: {source}")]
    Stage { stage: Stage, source: Box<Error> },
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn data(message: impl fmt::Display) -> Self {
        Error::Data(message.to_string())
    }

    pub fn at(self, stage: Stage) -> Self {
        match self {
            tagged @ Error::Stage { .. } => tagged,
            other => Error::Stage { stage, source: Box::new(other) },
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// Process exit status: 1 usage, 2 data or IO, 3 numeric divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Diverged(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Io { .. } | Error::Parse(_) | Error::Data(_) => 2,
        }
    }
}

impl From<slicegraph_core::gcn::GcnError> for Error {
    fn from(e: slicegraph_core::gcn::GcnError) -> Self {
        match e {
            slicegraph_core::gcn::GcnError::Diverged { .. } => Error::Diverged(e.to_string()),
            other => Error::data(other),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Adds a stage tag to the error of a result.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.into().at(stage))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_inner_error() {
        assert_eq!(Error::Usage("x".into()).exit_code(), 1);
        assert_eq!(Error::data("x").at(Stage::Embed).exit_code(), 2);
        assert_eq!(Error::Diverged("nan".into()).at(Stage::Train).exit_code(), 3);
        let e = Error::data("missing embedding for slice 4").at(Stage::Embed).at(Stage::Train);
        assert_eq!(e.stage(), Some(Stage::Embed));
        assert_eq!(e.to_string(), "embed: missing embedding for slice 4");
    }
}
