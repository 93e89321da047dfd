use std::path::PathBuf;

use num_complex::Complex64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is singular: no acceptable pivot in column {column}")]
    SingularMatrix { column: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("pencil is singular: E has condition estimate {cond:.3e}")]
    SingularPencil { cond: f64 },

    #[error("shifted system is singular at s = {s}")]
    SingularAtShift { s: Complex64 },

    #[error("order {order} exceeds the dense oracle cap {cap}")]
    OracleCapExceeded { order: usize, cap: usize },

    #[error("algebraic block J4 is singular (pivot column {column})")]
    SingularJ4 { column: usize },

    #[error("differential block E1 is singular (pivot column {column})")]
    SingularE1 { column: usize },

    #[error("missing file {}", path.display())]
    MissingFile { path: PathBuf },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input {}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("Lyapunov equation not uniquely solvable: eigenvalues {lambda} and {mu} sum to zero")]
    UnsolvableLyapunov { lambda: Complex64, mu: Complex64 },

    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),

    #[error("iteration failed to converge: {0}")]
    ConvergenceFailure(String),

    #[error("system is not stabilizable: unstable mode {eigenvalue} is uncontrollable")]
    Unstabilizable { eigenvalue: Complex64 },

    #[error("finite eigenvalue {eigenvalue} lies on the imaginary axis")]
    ImaginaryAxisEigenvalue { eigenvalue: Complex64 },

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("invalid shift set: {0}")]
    InvalidShifts(String),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile { path }
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
