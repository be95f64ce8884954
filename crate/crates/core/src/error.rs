use thiserror::Error;

/// Errors raised by the library. Numerical non-convergence is usually
/// reported through flags on result types rather than through this enum.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    #[error("singular matrix: pivot {pivot:e} below threshold at column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("malformed sparse matrix: {0}")]
    InvalidMatrix(String),

    #[error("degenerate tetrahedron {index} with volume {volume:e}")]
    DegenerateElement { index: usize, volume: f64 },

    #[error("level {level} is too fine: index type overflows")]
    LevelTooLarge { level: usize },

    #[error("mismatched levels: {0}")]
    LevelMismatch(String),

    #[error("invalid smoother specification: {0}")]
    InvalidSpec(String),

    #[error("conjugate gradient did not converge: residual {residual:e} after {iterations} iterations")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("power method: start vector is zero after reseeding")]
    ZeroStartVector,

    #[error("invalid configuration key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
