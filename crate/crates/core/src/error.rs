use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular element: {0}")]
    Singular(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("invalid operator model: {0}")]
    Model(String),
    #[error("positivity violated: {0}")]
    Positivity(String),
    #[error("structure error (residual {residual:.3e}): {msg}")]
    Structure { msg: String, residual: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no convergence after {iters} iterations (last residual {residual:.3e})")]
    Convergence { iters: usize, residual: f64 },
    #[error("grid error: {0}")]
    Grid(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
