use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: unknown level `{value}`")]
    UnknownLevel {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: missing value")]
    MissingCell { row: usize, column: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("not enough rows: {0}")]
    TooFewRows(String),

    #[error("class `{class}` occurs {count} times, fewer than the required {min}")]
    ClassTooRare {
        class: String,
        count: usize,
        min: usize,
    },

    #[error("column `{column}`: {source}")]
    InColumn {
        column: String,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the name of the column it concerns.
    pub fn in_column(self, column: impl Into<String>) -> Error {
        Error::InColumn {
            column: column.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping column context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::InColumn { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.root(), Error::Numeric(_) | Error::NonFinite(_))
    }

    pub fn is_config(&self) -> bool {
        matches!(self.root(), Error::Config(_))
    }
}
