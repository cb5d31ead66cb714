//! Error taxonomy shared by every module in the crate.
//!
//! Each variant corresponds to one failure class named in the operation
//! contracts: resource guards (`CapExceeded`, `BudgetExceeded`), input
//! validation (`InvalidParam`, `IndexOutOfRange`, `ShapeMismatch`), and the
//! multivariate tail bound's mathematical preconditions
//! (`HypothesisViolated`, `Singular`).

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
///
/// Messages carry the offending values so CLI diagnostics can be emitted
/// without re-deriving context.
#[derive(Debug, Error)]
pub enum Error {
    /// Dense materialization was requested for more entries than the
    /// configured memory cap allows.
    #[error("dense tensor of {requested} entries exceeds the cap of {cap} entries")]
    CapExceeded { requested: u128, cap: u128 },

    /// A parameter violated its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// A tensor index fell outside [1, N].
    #[error("index {index} on axis {axis} is outside [1, {n}]")]
    IndexOutOfRange { axis: usize, index: usize, n: usize },

    /// An enumeration or summation would exceed the configured work budget.
    #[error("work of {requested} {unit} exceeds the budget of {budget} {unit}")]
    BudgetExceeded {
        requested: f64,
        budget: f64,
        unit: &'static str,
    },

    /// Two multi-indexes with incompatible (n, k, p) were combined.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The multivariate tail bound requires Σ⁻¹t to be entrywise positive.
    #[error("tail-bound hypothesis violated: component {component} of Σ⁻¹t is {value}, not positive")]
    HypothesisViolated { component: usize, value: f64 },

    /// A covariance matrix was not symmetric positive definite.
    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    /// Filesystem failures from tensor dumps and experiment outputs.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Convenience constructor for `InvalidParam` from anything printable.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }
}
