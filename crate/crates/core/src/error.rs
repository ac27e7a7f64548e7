use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the game, gain, simulation and diagnostic routines.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type the
/// failing routine was instantiated with.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point outside the action set: {0}")]
    Infeasible(String),

    #[error("best-reply iteration did not converge after {iterations} iterations (residual {residual:e})")]
    MaxIterExceeded {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("budget exceeded: {requested} requested, {budget} allowed")]
    BudgetExceeded { requested: usize, budget: usize },

    #[error(
        "window starting at t = {start} precedes the recorded history (earliest t = {earliest})"
    )]
    WindowUnderflow { start: f64, earliest: f64 },

    #[error("expectation of player {observer} about player {target} at node {node} deviates by {deviation:e}, exceeding the window bound {bound:e}")]
    ConsistencyViolation {
        node: usize,
        observer: usize,
        target: usize,
        deviation: f64,
        bound: f64,
    },

    #[error("player {player} left its admissible range at t = {t}: {detail}")]
    RangeViolation {
        t: f64,
        player: usize,
        detail: String,
    },

    #[error("invalid layer assignment: {0}")]
    Partition(String),

    #[error("internal ordering error: {0}")]
    Ordering(String),

    #[error("weights do not sum to one: {0}")]
    Normalization(String),

    #[error("point is not a fixed point of the best-reply map (residual {residual:e})")]
    NotFixedPoint { residual: f64 },

    #[error("stationary trajectory drifted by {drift:e}")]
    NonConstant { drift: f64 },
}
