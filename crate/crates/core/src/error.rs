use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("non-numeric value {value:?} at row {row}, column {column:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("missing value at row {row}, column {column:?}")]
    MissingValue { row: usize, column: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {0:?} has zero variance")]
    ZeroVariance(String),
    #[error("invalid roles: {0}")]
    Roles(String),
    #[error("degenerate dataset: {0}")]
    Degenerate(String),
    #[error("rank-deficient design: column {column} is linearly dependent on earlier columns")]
    RankDeficient { column: usize },
    #[error("too few rows: {rows} rows for {columns} columns")]
    TooFewRows { rows: usize, columns: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("single class: labels contain only {0}")]
    SingleClass(u8),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("outcome leakage: feature {0:?} is an outcome-role column")]
    Leakage(String),
    #[error("invalid config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
