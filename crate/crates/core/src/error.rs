use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("ragged rows: row {row} has {found} columns, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("insufficient columns: need {needed}, panel has {available}")]
    InsufficientColumns { needed: usize, available: usize },

    #[error("symmetric eigensolver did not converge")]
    ConvergenceFailure,

    #[error("argument {ell} lies inside the support [{left}, {right}]")]
    InsideSupport { ell: f64, left: f64, right: f64 },

    #[error("aspect ratio c = 1 has no root in the requested branch; use the c = 1 formula")]
    CEqualsOne,

    #[error("factor strength must be positive, got {0}")]
    NonPositiveLambda(f64),

    #[error("no eigenvalues inside the noise window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("aspect ratio c = 1 makes the noise-variance iteration degenerate; supply sigma2")]
    AspectRatioOne,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
