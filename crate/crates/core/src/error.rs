use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("function is +inf at every probe point")]
    EmptyDomain,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Fock basis dimension {dim} exceeds the cap of {cap}")]
    BasisTooLarge { dim: usize, cap: usize },

    #[error("eigensolver failure: {0}")]
    EigensolverFailure(String),

    #[error("invalid lattice parameters: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("search direction has zero norm")]
    ZeroDirection,

    #[error("line search stalled after {halvings} halvings")]
    StalledLineSearch { halvings: usize },

    #[error("point outside the domain: {0}")]
    DomainError(String),

    #[error("unsupported oracle: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
