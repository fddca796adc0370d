use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("empty support: every entry is masked")]
    EmptySupport,
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("vector length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    OutOfRange(&'static str),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum InstructionError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("role prefix is empty after trimming")]
    EmptyPrefix,
    #[error("invalid prefix catalog: {}", .0.join("; "))]
    Catalog(Vec<String>),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("server returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("token {token} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { token: u32, vocab_size: usize },
    #[error("invalid model definition: {0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("failed to bind {address}: {source}")]
    Bind {
        address: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Instruction(#[from] InstructionError),
    #[error("invalid contrast tree: {0}")]
    Tree(String),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{path}:{line}: {message}")]
    Dataset {
        path: String,
        line: usize,
        message: String,
    },
    #[error("task {task}: image {image_id} has an unpaired question count ({count})")]
    Unpaired {
        task: String,
        image_id: String,
        count: usize,
    },
    #[error("confusion counts are all zero")]
    EmptyCounts,
    #[error("anchor object {0:?} is not in the lexicon")]
    UnknownAnchor(String),
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("model {0:?} has no token table; answers cannot be detokenized")]
    NoTokenTable(String),
    #[error("decoding item {id}: {source}")]
    Decode {
        id: String,
        #[source]
        source: DecodeError,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid worker count: {0}")]
    Workers(String),
}
