use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    /// A logarithm or power was evaluated on (or at the origin of) its branch cut.
    #[error("branch error: {context} evaluated at {value} which lies on the principal cut")]
    Branch { value: Complex64, context: String },

    #[error("inversion error ({context}): matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    Singular { condition: f64, context: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// Point is outside the admissible set of a chart (near a singular locus).
    #[error("admissibility error: {0}")]
    Admissibility(String),

    /// Evaluated off the constraint manifold, where the vertex form is meaningless.
    #[error("constraint violation ({context}): residual {residual:.3e} exceeds {tolerance:.1e}")]
    Constraint {
        residual: f64,
        tolerance: f64,
        context: String,
    },

    #[error("path error: {0}")]
    Path(String),

    #[error("validity error: {0}")]
    Validity(String),

    #[error("invariant error: {0}")]
    Invariant(String),

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Prefix the error context with a label (vertex or arc name).
    pub fn within(self, label: &str) -> Error {
        match self {
            Error::Singular { condition, context } => Error::Singular {
                condition,
                context: format!("{label}: {context}"),
            },
            Error::Constraint {
                residual,
                tolerance,
                context,
            } => Error::Constraint {
                residual,
                tolerance,
                context: format!("{label}: {context}"),
            },
            Error::Branch { value, context } => Error::Branch {
                value,
                context: format!("{label}: {context}"),
            },
            other => other,
        }
    }
}
