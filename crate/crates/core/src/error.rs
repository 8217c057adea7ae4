//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in this crate.
///
/// Failures of the estimators themselves (an abort of the grouped baseline,
/// a suppressed histogram release) are not errors; they are ordinary values
/// of the respective result enums. `Error` covers invalid inputs, numerical
/// breakdown, and infeasible requests.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two operands have incompatible dimensions.
    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    /// A point exceeds the stated norm bound of its dataset.
    #[error("point {index} has norm {norm} exceeding the bound {bound}")]
    PointOutOfBounds { index: usize, norm: f64, bound: f64 },

    /// An input or intermediate value is NaN or infinite.
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    /// A matrix required to be positive (semi)definite is not.
    #[error("matrix is not positive definite in {context}: eigenvalue {eigenvalue}")]
    NotPositiveDefinite { context: &'static str, eigenvalue: f64 },

    /// The Jacobi sweep limit was reached before the off-diagonal mass
    /// dropped below tolerance.
    #[error("eigendecomposition did not converge after {sweeps} sweeps (off-diagonal {offdiag:e})")]
    EigNoConvergence { sweeps: usize, offdiag: f64 },

    /// A basis passed to a projection constructor is not orthonormal.
    #[error("basis is not orthonormal (gram deviation {deviation:e})")]
    NonOrthonormalBasis { deviation: f64 },

    /// The requested accuracy or privacy target cannot be met: the planner
    /// would need more samples than the caller allows, or a closed-form
    /// calibration has no solution.
    #[error("infeasible request: {0}")]
    Infeasible(String),

    /// Malformed serialized data.
    #[error("parse error at {location}: {reason}")]
    Parse { location: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand for [`Error::InvalidParameter`].
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_name_the_offender() {
        let e = Error::invalid("rho", "must be positive");
        assert_eq!(e.to_string(), "invalid parameter rho: must be positive");

        let e = Error::DimensionMismatch {
            context: "matrix product",
            left: 3,
            right: 4,
        };
        assert!(e.to_string().contains("3 vs 4"));
    }
}
