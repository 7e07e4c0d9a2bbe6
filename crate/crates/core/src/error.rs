use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed WAV container: {0}")]
    MalformedContainer(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error("clip is silent (all samples are zero)")]
    SilentClip,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("label {value} at line {line} is outside [{min}, {max}]")]
    Range {
        line: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("duplicate clip path in manifest: {0}")]
    DuplicatePath(String),

    #[error("clip too short: need at least {needed} samples, got {got}")]
    ClipTooShort { needed: usize, got: usize },
    #[error("clip shorter than one analysis window ({needed} samples, got {got})")]
    WindowTooShort { needed: usize, got: usize },
    #[error("spectrum has no energy")]
    EmptySpectrum,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is degenerate (rank 0)")]
    DegenerateMatrix,
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("target has zero variance")]
    ConstantTarget,
    #[error("input has zero variance")]
    ConstantInput,
    #[error("k = {k} is outside 1..={max}")]
    BadK { k: usize, max: usize },

    #[error("unknown hyperparameter `{name}` for {family}")]
    UnknownHyperparameter { family: String, name: String },
    #[error("invalid value for hyperparameter `{name}`: {value}")]
    InvalidHyperparameter { name: String, value: f64 },
    #[error("training loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },

    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt document: {0}")]
    CorruptDocument(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("checkpoint does not match this search: {0}")]
    CheckpointMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
