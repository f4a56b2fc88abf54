use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent data (non-finite values, bad dimensions, bad indices).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A tuning parameter or configuration value outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// An operation was requested in a state where it cannot apply.
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("LP solver failed: {0}")]
    Solver(String),
    #[error("randomized rounding gave up after {attempts} attempts")]
    Rounding { attempts: usize },
    #[error("class {class}: {source}")]
    InClass {
        class: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_class(self, class: usize) -> Error {
        Error::InClass {
            class,
            source: Box::new(self),
        }
    }

    /// True for LP and rounding failures, however deeply tagged.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::Solver(_) | Error::Rounding { .. } => true,
            Error::InClass { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
