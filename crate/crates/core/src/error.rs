use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum JdsvdError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("MatrixMarket parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported MatrixMarket field `{0}` (only real, integer and pattern are accepted)")]
    UnsupportedField(String),

    #[error("index ({row}, {col}) out of bounds for a {nrows}x{ncols} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0}")]
    Precondition(String),

    #[error("symmetric eigensolver did not converge after {0} sweeps")]
    EigNoConvergence(usize),

    #[error("singular value decomposition did not converge after {0} sweeps")]
    SvdNoConvergence(usize),

    #[error("degenerate pencil: G has no eigenvalue above the truncation threshold")]
    DegeneratePencil,

    #[error("extraction failed: every candidate eigenvector has a degenerate (c, d) split")]
    DegenerateExtraction,

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("singular projected system: {0}")]
    SingularSystem(String),

    #[error("matrix of size {nrows}x{ncols} exceeds the desk-scale cap ({cap} for M+N)")]
    TooLarge { nrows: usize, ncols: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, JdsvdError>;
