use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} has zero degree")]
    DegenerateNode { node: usize },

    #[error("block {block} has zero total connectivity")]
    DegenerateBlock { block: usize },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("transition matrix is not reversible (max detailed-balance violation {max_violation:e})")]
    ReversibilityViolation { max_violation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("branching process cannot reach {target} nodes: died out {restarts} times")]
    ImpossibleTarget { target: usize, restarts: usize },

    #[error("sampling failed after {restarts} restarts: best attempt reached {reached} of {target} participants")]
    SamplingFailed {
        target: usize,
        reached: usize,
        restarts: usize,
    },

    #[error("tree node {node} has no block label")]
    MissingLabel { node: usize },

    #[error("singular covariance: {0}")]
    Singular(String),

    #[error("covariance matrix is not positive definite (Cholesky failed); add a nugget to the diagonal")]
    Factorization,

    #[error("{n} nodes exceeds the dense covariance limit of {limit}")]
    Capacity { n: usize, limit: usize },

    #[error("repeated eigenvalue {0}: the reduced Vandermonde system is not supported")]
    RepeatedEigenvalue(f64),

    #[error("tree has no pairs at distance {lag}")]
    InsufficientDepth { lag: usize },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
