use thiserror::Error;

pub type Result<T> = std::result::Result<T, SysIdError>;

#[derive(Debug, Error)]
pub enum SysIdError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("insufficient data: {what} needs {required} samples, {available} available")]
    InsufficientData {
        what: &'static str,
        required: usize,
        available: usize,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("predictor is unstable: spectral radius of A - KC is {radius:.6}")]
    Unstable { radius: f64 },

    #[error(
        "Wishart degrees of freedom {dof} must exceed n_o - 1 = {} (i = {i}, j = {j}, n_o = {n_o})",
        .n_o - 1
    )]
    DegreesOfFreedom { dof: f64, i: usize, j: usize, n_o: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("gibbs sweep {iteration}: {source}")]
    Chain {
        iteration: usize,
        #[source]
        source: Box<SysIdError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SysIdError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        SysIdError::Dimension(msg.into())
    }

    /// Coarse classification used by the CLI for exit codes.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            SysIdError::Parse { .. }
                | SysIdError::InsufficientData { .. }
                | SysIdError::Io(_)
                | SysIdError::Dimension(_)
        )
    }
}
