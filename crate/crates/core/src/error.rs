use thiserror::Error;

/// Errors raised by model construction and analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Caller violated an operation precondition (bad position, bad class, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A table-backed rate function was evaluated outside its declared domain.
    #[error("macrostate {macrostate:?} is outside the rate table domain")]
    Domain { macrostate: Vec<u32> },

    /// A graph or order does not have the required structure.
    #[error("structure error: {0}")]
    Structure(String),

    /// An enumeration or exploration exceeded its state budget.
    #[error("state budget exceeded while {context}: {count} states (budget {budget})")]
    Resource {
        context: String,
        count: usize,
        budget: usize,
    },

    /// The rate function cannot provide a quantity an analysis needs.
    #[error("capability error: {0}")]
    Capability(String),

    /// A feature that the input format reserves but the engine does not support.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),

    /// An event replay failed at the given step (0-based).
    #[error("replay failed at step {step}: {reason}")]
    Replay { step: usize, reason: String },

    /// An iterative solver did not reach its residual target.
    #[error("no convergence after {iterations} iterations (last residual {last_residual:e})")]
    Convergence {
        iterations: usize,
        last_residual: f64,
        residual_history: Vec<f64>,
    },

    /// A closed model reached a state with no outgoing rate.
    #[error("deadlock: zero total rate in state {0}")]
    Deadlock(String),
}

pub type Result<T> = std::result::Result<T, Error>;
