use thiserror::Error;

/// Errors raised by the scheduling library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("power mapping infeasible: spectral radius {0:.6} >= 1")]
    MappingInfeasible(f64),

    #[error("channel matrix of the selected set is rank deficient")]
    RankDeficient,

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("conic solver failed: {0}")]
    Solver(String),

    #[error("exhaustive search over {users} users exceeds the enumeration cap {cap}")]
    EnumerationCap { users: usize, cap: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
