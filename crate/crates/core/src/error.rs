use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: invalid UTF-8 at byte offset {offset}")]
    Decode { path: PathBuf, offset: usize },

    #[error("character {ch:?} at position {position} is outside the permutation domain")]
    OutOfDomain { ch: char, position: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("vocabulary is empty")]
    EmptyVocab,

    #[error("non-finite value in {matrix} row {row} (epoch {epoch}, lr {lr})")]
    NonFinite {
        matrix: &'static str,
        row: usize,
        epoch: usize,
        lr: f32,
    },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("unknown ngram {0:?}")]
    UnknownNgram(String),

    #[error("incompatible representations: {0}")]
    Incompatible(String),

    #[error("corpus too short: need {needed} characters, have {have}")]
    CorpusTooShort { needed: usize, have: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
