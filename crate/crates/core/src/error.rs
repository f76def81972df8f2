use thiserror::Error;

/// Errors surfaced by oracles, planners and online loops.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// A guarantee hypothesis the caller must certify does not hold
    /// (e.g. `L n^{-alpha}` too large for the requested horizon).
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    /// Strict-mode budget enforcement tripped on a generative phase.
    #[error("query budget overflow in phase {phase}: charged {charged} of {budget}")]
    BudgetOverflow { phase: u32, charged: u64, budget: u64 },

    /// An iterative exact oracle or value-iteration loop hit its sweep cap.
    #[error("no convergence after {sweeps} sweeps: {context}")]
    NoConvergence { sweeps: u64, context: String },

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("net size {size} exceeds cap {cap}")]
    NetCap { size: u64, cap: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
