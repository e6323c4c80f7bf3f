use std::fmt;

use thiserror::Error;

/// A located diagnostic produced while reading a `.jp` score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    MeasureDuration,
    UnknownTechnique,
    UnknownHeader,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::MeasureDuration => "measure duration error",
            ParseErrorKind::UnknownTechnique => "unknown technique",
            ParseErrorKind::UnknownHeader => "unknown header field",
        };
        write!(f, "{}:{}: {}: {}", self.line, self.column, kind, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Parse(#[from] ParseError),

    #[error("invalid duration: {0}")]
    Duration(String),

    #[error("invalid pitch: {0}")]
    Pitch(String),

    #[error("unrepresentable in MusicXML: {0}")]
    Unrepresentable(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("degenerate corpus: {0}")]
    DegenerateCorpus(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("need at least two classes, found {0}")]
    SingleClass(usize),

    #[error("stratification impossible: {0}")]
    Stratification(String),

    #[error("unregistered tag `{0}`")]
    UnregisteredTag(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("all tags forbidden at position {0}")]
    AllTagsForbidden(usize),

    #[error("rule error at line {line}: {message}")]
    Rule { line: usize, message: String },

    #[error("invalid mutation: {0}")]
    Mutation(String),

    #[error("classifier predicts {predicted} but the piece is labelled {declared}")]
    LabelMismatch { declared: String, predicted: String },

    #[error("model format error at line {line}: {message}")]
    ModelFormat { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn model_format(line: usize, message: impl Into<String>) -> Error {
    Error::ModelFormat {
        line,
        message: message.into(),
    }
}
