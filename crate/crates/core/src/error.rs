use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by model construction and the estimators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("transition row {row} sums to {sum}, expected 1")]
    NonStochasticRow { row: usize, sum: f64 },

    #[error("transition entry ({row}, {col}) = {value} is not a probability")]
    InvalidProbability { row: usize, col: usize, value: f64 },

    #[error("chain is reducible: state {unreachable} cannot be reached from state {from}")]
    Reducible { from: usize, unreachable: usize },

    #[error("{what} for state {state} is not in the simplex: {reason}")]
    NotInSimplex {
        what: &'static str,
        state: usize,
        reason: String,
    },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("investment rate {0} is outside (0, 1)")]
    InvalidRate(f64),

    #[error("fixed point is inconsistent on transition {from} -> {to}: residual {residual:e}")]
    FixedPointInconsistent { from: usize, to: usize, residual: f64 },

    #[error("law of motion maps a point of the domain of state {from} outside the domain of state {to}")]
    DomainNotInvariant { from: usize, to: usize },

    #[error("initial point lies outside the domain of state {state}")]
    InitialOutsideDomain { state: usize },

    #[error("iterate left the declared domain at t = {t}")]
    DomainEscape { t: usize },

    #[error("point {x} is outside the domain [0, inf)")]
    NegativeWealth { x: f64 },

    #[error("non-finite value at t = {t} (window starting in state {state}): {context}")]
    NonFinite {
        t: usize,
        state: usize,
        context: &'static str,
    },

    #[error("Kelly solvers disagree by {gap:e}")]
    MethodsDisagree { gap: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    /// True for errors caused by invalid input (as opposed to numerical breakdown).
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonFinite { .. }
                | Error::MethodsDisagree { .. }
                | Error::Numerical(_)
                | Error::DomainEscape { .. }
        )
    }
}
