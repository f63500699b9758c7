use thiserror::Error;

use crate::data::Task;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid axis {axis} for tensor of rank {rank}")]
    InvalidAxis { axis: usize, rank: usize },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown {task} label `{label}`")]
    UnknownLabel { task: Task, label: String },
    #[error("sentence {sentence}: missing {column} column")]
    MissingColumn { sentence: usize, column: &'static str },
    #[error("embedding line {line}: expected {expected} values, found {found}")]
    EmbeddingDim { line: usize, expected: usize, found: usize },
    #[error("corpus of {0} sentences is too small to split (need at least 10)")]
    CorpusTooSmall(usize),

    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("expected {expected} tag feature columns, got {found}")]
    FeatureArity { expected: usize, found: usize },
    #[error("label index {index} out of range for {count} labels")]
    LabelIndex { index: usize, count: usize },
    #[error("length mismatch: {left} vs {right}")]
    Length { left: usize, right: usize },
    #[error("non-finite loss at sentence {sentence} (epoch {epoch})")]
    NanLoss { epoch: usize, sentence: usize },
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("{0} is only defined for span tasks")]
    NotSpanTask(Task),

    #[error("not a model container (bad magic)")]
    BadMagic,
    #[error("unsupported container version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("model container truncated")]
    Truncated,
    #[error("model container checksum mismatch")]
    Checksum,
    #[error("model is for task {found}, expected {expected}")]
    TaskMismatch { expected: Task, found: Task },
    #[error("malformed model container: {0}")]
    Container(String),
    #[error("incompatible pipeline bundle: {0}")]
    Bundle(String),

    #[error("tokenizer failed: {0}")]
    Tokenizer(String),
    #[error("document is not fully annotated (sentence {sentence}, word {word})")]
    Unannotated { sentence: usize, word: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
