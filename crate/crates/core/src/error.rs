use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("Sylvester solve failed, relative residual {residual:e}")]
    Sylvester { residual: f64 },

    #[error("Schur iteration did not converge within {sweeps} sweeps")]
    SchurNoConvergence { sweeps: usize },

    #[error("pilot matrix is rank deficient (condition number {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("pilot file, line {line}: {message}")]
    PilotFile { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
