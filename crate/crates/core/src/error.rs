use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid link budget: {0}")]
    InvalidBudget(String),

    #[error("Doppler spread must be positive and finite, got {0}")]
    InvalidDoppler(f64),

    #[error("configuration is not IA-feasible: {0}")]
    InfeasibleConfig(String),

    #[error("IA solver did not converge after {iterations} iterations (leakage {leakage:.3e})")]
    NonConvergence {
        iterations: usize,
        leakage: f64,
        /// Best iterate reached before giving up.
        best: Box<crate::ia::IaSolution>,
    },

    #[error("interference spans the full receive space at receiver {receiver}, stream {stream}")]
    RankDeficiency { receiver: usize, stream: usize },

    #[error("{phase} needs at least {required} symbols, got {given}")]
    PilotLength {
        phase: &'static str,
        required: usize,
        given: usize,
    },

    #[error("feedback channel estimate is singular for receiver {0}")]
    SingularFeedback(usize),

    #[error("overhead budget infeasible: {0}")]
    InfeasibleBudget(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
