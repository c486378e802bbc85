use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The parameter lies outside the regime an operation is defined for.
    #[error("parameter out of range: {0}")]
    Regime(String),

    /// An input violated a documented precondition.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Root bracketing failed; carries the endpoint values seen.
    #[error("no sign change on bracket: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    /// An iterative scheme ran out of its iteration budget.
    #[error("no convergence after {steps} steps: {what}")]
    Convergence { what: String, steps: usize },

    /// A combinatorial budget (word count, branch count) was exhausted.
    #[error("budget exhausted: {0}")]
    Budget(String),

    /// A constructed object failed one of its structural checks.
    #[error("structural check failed: {0}")]
    Structure(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
