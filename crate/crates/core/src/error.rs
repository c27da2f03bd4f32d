use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported quadrature degree {0} (maximum is 4)")]
    UnsupportedDegree(usize),

    #[error("form structure error: {0}")]
    Form(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("sparsity pattern error: {0}")]
    Pattern(String),

    #[error("factorization failed in subdomain {subdomain}: {msg}")]
    Factorization { subdomain: usize, msg: String },

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    /// Wraps a solver failure with the name of the stage that ran it.
    pub fn context(self, what: &str) -> Self {
        match self {
            Error::Divergence(m) => Error::Divergence(format!("{what}: {m}")),
            Error::Factorization { subdomain, msg } => {
                Error::Factorization { subdomain, msg: format!("{what}: {msg}") }
            }
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
