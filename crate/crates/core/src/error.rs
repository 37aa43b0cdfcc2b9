use thiserror::Error;

/// Errors raised by the numerical kernels, the solver, and the IO layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("positivity violated at point {point}: min eigenvalue {eigenvalue:.3e}")]
    Positivity { point: usize, eigenvalue: f64 },

    #[error("nonpositive determinant at point {point}: {value:.3e}")]
    NonpositiveDeterminant { point: usize, value: f64 },

    #[error("degree overflow: bidegree ({p}, {q}) exceeds ({n}, {n})")]
    DegreeOverflow { p: usize, q: usize, n: usize },

    #[error("krylov iteration did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    KrylovDivergence { residual: f64, iterations: usize },

    #[error("newton iteration did not converge: best residual {best_residual:.3e} after {iterations} iterations")]
    NewtonDivergence { best_residual: f64, iterations: usize },

    #[error("gauduchon kernel is degenerate: {0}")]
    KernelDegenerate(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("field file: {0}")]
    FieldFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
