use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gaussian mixture product has no surviving weight")]
    DegenerateProduct,

    #[error("degenerate projection geometry: {0}")]
    DegenerateGeometry(String),

    #[error("code construction failed: {0}")]
    CodeConstruction(String),

    #[error("malformed alist input at line {line}: {message}")]
    Alist { line: usize, message: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
