use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("record {index} ({user_id}/{item_id}) has unusable timestamp {timestamp}")]
    BadTimestamp {
        index: usize,
        user_id: String,
        item_id: String,
        timestamp: i64,
    },

    #[error("all data was filtered away (min_support = {min_support})")]
    EmptyDataset { min_support: usize },

    #[error("need at least {needed} sessions to realise the split ratio, got {got}")]
    TooFewSessions { needed: usize, got: usize },

    #[error("catalog too small: need {needed} negatives, only {available} eligible (short by {})", needed - available)]
    CatalogTooSmall { needed: usize, available: usize },

    #[error("unknown item id `{0}`")]
    UnknownItem(String),

    #[error("duplicate item id `{0}` in catalog")]
    DuplicateItem(String),

    #[error("backend error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Backend {
        status: Option<u16>,
        message: String,
    },

    #[error("unparseable judge reply: {0:?}")]
    UnparseableJudge(String),

    #[error("session `{0}` is not a miss")]
    NotAMiss(String),

    #[error("knowledge base full (capacity {0})")]
    KnowledgeBaseFull(usize),

    #[error("degenerate text: encoding produced a zero vector")]
    DegenerateText,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("distribution support violation at index {0}")]
    SupportViolation(usize),

    #[error("old policy assigns zero probability to action {0}")]
    ZeroOldProbability(usize),

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("policy checkpoint was trained against knowledge base {expected}, not {got}")]
    FingerprintMismatch { expected: String, got: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
