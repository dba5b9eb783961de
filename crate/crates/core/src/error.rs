//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by parsers, validators, oracles and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input text, with a 1-based line and column.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    /// Structurally well-formed input that violates a model invariant.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// An exact oracle or a verbatim formula would exceed its budget.
    #[error("budget exceeded: {0}")]
    Budget(String),
    /// GYO ear removal got stuck: the query has no join tree.
    #[error("query is not acyclic: no join tree exists")]
    NotAcyclic,
    /// A randomized procedure reported FAIL.
    #[error("FAIL: {0}")]
    Fail(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn parse(line: usize, column: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: msg.into(),
        }
    }
}

/// Maps a 0-based byte offset into `text` to a 1-based (line, column) pair.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, ch) in text.char_indices() {
        if i >= offset {
            break;
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}
