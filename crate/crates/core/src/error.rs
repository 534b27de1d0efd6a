use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextSimError {
    #[error("length difference ratio is undefined for two empty names")]
    UndefinedRatio,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("no embeddable content: input produced a zero vector")]
    ZeroVector,
    #[error("cosine similarity undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no vectors to aggregate")]
    NoVectors,
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("vector file line {line}: {message}")]
    VectorFile { line: usize, message: String },
    #[error("reading vector file: {0}")]
    Io(String),
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate package name in index input: {0}")]
    DuplicateName(String),
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
    #[error("index is empty")]
    Empty,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("index file {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("index file version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("metadata store {path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("metadata store {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FetchError {
    #[error("package not found in registry: {0}")]
    NotFound(String),
    #[error("transient registry failure: {0}")]
    Transient(String),
    #[error("malformed registry response: {0}")]
    Parse(String),
    #[error("no registry API for ecosystem {0}")]
    Unsupported(String),
}

#[derive(Debug, Error)]
pub enum AcquireError {
    #[error("metadata for {ecosystem}/{name} is not in the local store and network access is disabled")]
    Unavailable { ecosystem: String, name: String },
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContentError {
    #[error("package content unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("clock skew: timestamp {timestamp} is later than reference time {now}")]
    ClockSkew { timestamp: String, now: String },
    #[error("feature CSV: {0}")]
    Csv(String),
    #[error("feature CSV columns do not match the schema: {0}")]
    Schema(String),
}

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("training data has a single class; a classifier cannot be fit")]
    DegenerateModel,
    #[error("dataset too small: {0} rows (need at least 10)")]
    TooFewRows(usize),
    #[error("stratification failed: class {class} has {count} rows for {folds} folds")]
    Stratification { class: u8, count: usize, folds: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("model file is not a typoguard forest (bad magic header)")]
    BadMagic,
    #[error("model file version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("package metadata unavailable; populate the store (or drop --offline) and retry")]
    MetadataUnavailable {
        #[source]
        source: AcquireError,
    },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ablation configuration {0} does not include SS")]
    MissingSs(String),
    #[error("unknown feature group '{0}'")]
    UnknownGroup(String),
    #[error("pair dataset line {line}: {message}")]
    PairDataset { line: usize, message: String },
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Index(#[from] IndexError),
}
