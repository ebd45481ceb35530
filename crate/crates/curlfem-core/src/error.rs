use thiserror::Error;

/// Errors surfaced by mesh construction, space setup, assembly, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A requested feature is outside the supported range (e.g. basis degree).
    #[error("not implemented: {0}")]
    NotImplemented(String),

    /// The mesh failed a structural audit (orientation, face incidence, ...).
    #[error("mesh integrity: {0}")]
    MeshIntegrity(String),

    /// A matrix was structurally or numerically singular where a solve was required.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// An iterative or direct solver failed to reach the requested accuracy.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// A diagnostic was requested above its configured size cap.
    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    /// Configuration file problems (missing keys, bad values, unknown case).
    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
