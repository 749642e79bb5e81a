use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    /// Bad configuration (presets, bootstrap spec, split fraction).
    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}, column '{column}': {msg}")]
    Parse {
        line: u64,
        column: String,
        msg: String,
    },

    #[error("bucketizer error: {0}")]
    Bucketizer(String),

    #[error("cell (g={g}, k={k}) has {n} rows, need at least 2")]
    SparseCell { g: usize, k: usize, n: usize },

    #[error("{0}")]
    Normalization(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] succmax_core::Error),
}

impl DataError {
    pub fn is_config(&self) -> bool {
        matches!(self, DataError::Config(_))
    }
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;
