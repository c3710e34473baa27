use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// A diffusion coefficient was not strictly positive.
    #[error("ellipticity violated on element {element}: coefficient {value}")]
    Ellipticity { element: usize, value: f64 },

    #[error("solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("non-finite gradient or iterate at iteration {iteration}")]
    Divergence { iteration: u64 },

    /// The line search failed before the gradient tolerance was met.
    #[error("minimizer stalled after {iterations} iterations (gradient norm {grad_norm:e})")]
    Stalled {
        iterations: usize,
        grad_norm: f64,
        last: Vec<f64>,
    },

    /// Cholesky breakdown of a normal system; `pivot` is the failing row.
    #[error("normal system is rank deficient (pivot {pivot}, value {value:e})")]
    RankDeficient { pivot: usize, value: f64 },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any [`Error::Context`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
