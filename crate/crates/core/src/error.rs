use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Gauss-Hermite node {index} of {n} did not converge")]
    QuadratureNode { index: usize, n: usize },

    #[error("eigensolver did not converge for a {0}x{0} matrix")]
    EigenSolve(usize),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operation requires the symmetric Hermite basis")]
    UnsupportedBasis,

    #[error("matrix is not skew-symmetric (max |M + M^T| = {0:e})")]
    NotSkewSymmetric(f64),

    #[error("CFL condition violated: courant number {courant} > 1")]
    CflViolation { courant: f64 },

    #[error("non-finite value in the coefficient field after step {step}")]
    NonFinite { step: usize },

    #[error("imaginary residual {residual:e} exceeds tolerance {tolerance:e}")]
    ImaginaryResidual { residual: f64, tolerance: f64 },

    #[error("state has no energies but was evaluated at t = {0}")]
    MissingEnergies(f64),

    #[error("forcing method {0} is not unitary; enable the unsafe flag to use it")]
    UnsafeForcing(&'static str),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error classes, mapped to process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: configuration, arguments, unsupported combinations.
    Config,
    /// Numerical abort: CFL, non-finite values, failed solves.
    Numerical,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Io => 4,
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config { .. }
            | Error::InvalidArgument { .. }
            | Error::UnsupportedBasis
            | Error::UnsafeForcing(_) => ErrorKind::Config,
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
