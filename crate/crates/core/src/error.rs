use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("need at least {needed} samples along axis {axis}, found {found}")]
    TooFewSamples {
        axis: usize,
        needed: usize,
        found: usize,
    },

    #[error("query touches masked-out point {index:?}")]
    MaskedOut { index: Vec<usize> },

    #[error("region leaves the grid domain: {0}")]
    DomainEscape(String),

    #[error("insufficient margin: {0}")]
    InsufficientMargin(String),

    #[error("empty set: {0}")]
    Empty(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no convergence after {iterations} iterations: {detail}")]
    NonConvergence { iterations: usize, detail: String },

    #[error("plane slope at bound: |A| = {norm} >= {bound}")]
    SlopeBound { norm: f64, bound: f64 },

    #[error("certificate clause `{clause}` failed: measured {measured}, bound {bound}")]
    Certificate {
        clause: String,
        measured: f64,
        bound: f64,
    },

    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("cube {level}:{index:?}: {source}")]
    Cube {
        level: usize,
        index: Vec<i64>,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonConvergence { .. } | Error::SlopeBound { .. } => true,
            Error::Cube { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
