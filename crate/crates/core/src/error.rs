use thiserror::Error;

/// Errors raised by the simulator.
///
/// The variants map onto the process exit codes used by the binary:
/// configuration problems exit with 2, numerical failures with 3.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A builder was called with a level system of the wrong shape.
    #[error("wrong builder: {0}")]
    WrongBuilder(String),

    /// Numerical failure (non-convergence, norm violation, step underflow).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Branch assignment between two samples was ambiguous; the caller
    /// should refine the sampling step.
    #[error("step refinement required: {0}")]
    StepRefinement(String),

    /// Output could not be written.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::WrongBuilder(_) | Error::Domain(_) => 2,
            Error::Numeric(_) | Error::StepRefinement(_) => 3,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
