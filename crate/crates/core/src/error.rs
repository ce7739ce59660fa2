use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("need at least {min} observations, got {got}")]
    DataTooShort { got: usize, min: usize },

    #[error("need at least 5 non-zero observations for the signed-rank test, got {got}")]
    TooFewNonzero { got: usize },

    #[error("sample variance is zero")]
    ZeroVariance,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid mixture parameters: {0}")]
    InvalidParams(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("ellipse does not fit inside the grid after 3-sigma jitter: {0}")]
    EllipseOutOfBounds(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    QuadratureFailure { tol: f64, estimate: f64 },

    #[error("degenerate alternative: efficacy of the reference test is zero")]
    DegenerateAlternative,

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
