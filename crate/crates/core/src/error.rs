use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("singular triangular matrix (zero diagonal at {index})")]
    SingularTriangular { index: usize },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("R factors disagree: relative difference {agreement:.3e} exceeds {threshold:.3e}")]
    RFactorMismatch { agreement: f64, threshold: f64 },

    #[error("split point {shift} is too close to an eigenvalue")]
    SplitFailed { shift: f64 },

    #[error("rank estimates disagree: {0}")]
    RankMismatch(String),

    #[error("input is not close to a partial isometry: d(A) = {distance:.3e} exceeds {limit}")]
    NotNearPartialIsometry { distance: f64, limit: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
