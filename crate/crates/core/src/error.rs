use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DweError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DweError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{what}, line {line}: {msg}")]
    Parse {
        what: &'static str,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("vocabulary is empty after applying min_count={min_count}")]
    EmptyVocab { min_count: u64 },

    #[error("negative sampling needs at least 2 words, vocabulary has {0}")]
    VocabTooSmall(usize),

    #[error("glyph pack: {0}")]
    GlyphPack(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint/config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("tape does not belong to the current parameters")]
    StaleTape,

    #[error("loss became non-finite at step {step} (epoch {epoch}, batch {batch})")]
    NonFiniteLoss { epoch: usize, batch: usize, step: u64 },

    #[error("token {0:?} is not in the vocabulary")]
    OutOfVocabulary(String),

    #[error("token {0:?} has no usable representation")]
    Unrepresentable(String),

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("unknown {kind} {name:?}; available: {available}")]
    UnknownName {
        kind: &'static str,
        name: String,
        available: String,
    },
}

impl DweError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        DweError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, line: usize, msg: impl Into<String>) -> Self {
        DweError::Parse {
            what,
            line,
            msg: msg.into(),
        }
    }
}
