use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Where in an inversion a linear solve was attempted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveContext {
    pub iteration: Option<usize>,
    pub member: Option<usize>,
}

impl fmt::Display for SolveContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.iteration, self.member) {
            (Some(n), Some(j)) => write!(f, " at iteration {n}, member {j}"),
            (Some(n), None) => write!(f, " at iteration {n}"),
            (None, Some(j)) => write!(f, " for member {j}"),
            (None, None) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("grid too small: n = {n}, the 13-point stencil needs n >= {min}")]
    GridTooSmall { n: usize, min: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("shape mismatch: expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    /// Cholesky factorization hit a non-positive pivot, or the solution
    /// failed its residual check.
    #[error("linear solve failed (pivot {pivot}){context}")]
    Solver { pivot: usize, context: SolveContext },

    /// The regularized covariance in the Kalman gain is not positive definite.
    #[error("Kalman gain breakdown (pivot {pivot}){context}")]
    GainBreakdown { pivot: usize, context: SolveContext },

    #[error("norm of {0} is zero")]
    ZeroNorm(&'static str),

    #[error("ensemble is empty")]
    EmptyEnsemble,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }

    /// Attach iteration/member context to a solver error; other variants pass through.
    pub fn at(self, iteration: Option<usize>, member: Option<usize>) -> Self {
        let fill = |c: SolveContext| SolveContext {
            iteration: iteration.or(c.iteration),
            member: member.or(c.member),
        };
        match self {
            Error::Solver { pivot, context } => Error::Solver {
                pivot,
                context: fill(context),
            },
            Error::GainBreakdown { pivot, context } => Error::GainBreakdown {
                pivot,
                context: fill(context),
            },
            other => other,
        }
    }

    /// True for failures of a numerical solve, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Solver { .. } | Error::GainBreakdown { .. })
    }
}
