use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("arity error: expected {expected} samples, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("value error: {0}")]
    Value(String),
    #[error("degenerate: {0}")]
    Degenerate(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("monotonicity error: {0}")]
    Monotonicity(String),
    #[error("branch error: {0}")]
    Branch(String),
    #[error("combinatorics error: {0}")]
    Combinatorics(String),
    #[error("orbit escaped the domain: {0}")]
    Escape(String),
    #[error("Newton did not converge (last residual {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error("converged to the wrong branch: {0}")]
    WrongBranch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("structure error: {0}")]
    Structure(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("not near parabolic: {0}")]
    NotParabolic(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("at ell = {ell}: {source}")]
    AtEll { ell: f64, source: Box<Error> },
}

impl Error {
    pub fn at_ell(self, ell: f64) -> Error {
        match self {
            e @ Error::AtEll { .. } => e,
            e => Error::AtEll { ell, source: Box::new(e) },
        }
    }

    /// The error with any `AtEll` annotation removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtEll { source, .. } => source.root(),
            e => e,
        }
    }
}
