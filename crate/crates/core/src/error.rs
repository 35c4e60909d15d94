use std::path::PathBuf;

use crate::ids::DeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed CSV in {table}: {detail}")]
    MalformedCsv { table: String, detail: String },
    #[error("table {0} has no data rows")]
    EmptyTable(String),
    #[error("document {0} is empty")]
    EmptyDocument(String),

    #[error("minhash signature of an empty set is undefined")]
    EmptySet,
    #[error("query set is empty")]
    EmptyQuerySet,
    #[error("incompatible signatures: {0}")]
    IncompatibleSignatures(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("corpus has no {0} to sample")]
    EmptyModality(&'static str),
    #[error("labeling function index missing: {0}")]
    MissingIndex(String),
    #[error("insufficient gold labels: {have} covered pairs, need {need}")]
    InsufficientGold { have: usize, need: usize },
    #[error("label model needs a nonempty matrix and at least one active labeling function")]
    EmptyLabelMatrix,
    #[error("non-finite loss during {stage} at step {step}")]
    NonFiniteLoss { stage: &'static str, step: usize },
    #[error("training set yields no triplets")]
    NoTriplets,
    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("unknown DE {0}")]
    UnknownDe(DeId),
    #[error("DE {id} is a {actual}, expected {expected}")]
    WrongKind { id: DeId, expected: &'static str, actual: &'static str },
    #[error("index missing: {0}")]
    IndexMissing(&'static str),
    #[error("joint model has not been trained")]
    ModelMissing,
    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid synthetic lake spec: {0}")]
    InvalidSpec(String),
    #[error("ground truth is empty")]
    EmptyTruth,

    #[error("artifact {path}: {detail}")]
    Artifact { path: PathBuf, detail: String },
    #[error("artifact {artifact} is stale: built from {expected}, found {found}")]
    StaleArtifact { artifact: String, expected: String, found: String },
    #[error("snapshot parameters differ: {0}")]
    ParamMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn artifact(path: impl Into<PathBuf>, detail: impl ToString) -> Self {
        Error::Artifact { path: path.into(), detail: detail.to_string() }
    }
}
