use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller combined arguments in a way the operation does not accept.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("{what} did not converge (best residual {residual:.3e})")]
    Convergence { what: String, residual: f64 },

    #[error("target eigenvalue {target} is not above the measured infimum {infimum}")]
    InfeasibleTarget { target: f64, infimum: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("balls {first} and {second} overlap (depth {depth:.3e})")]
    Overlap {
        first: usize,
        second: usize,
        depth: f64,
    },

    #[error("mask parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
