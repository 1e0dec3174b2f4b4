use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// Power iteration ran out of budget; carries the last iterate.
    #[error("no convergence after {iterations} iterations (spread {spread:e})")]
    NonConvergence { iterations: usize, spread: f64, last_iterate: Vec<f64> },

    /// The dominant eigenvalue is not simple, so the subdifferential of the
    /// spectral potential is not a single measure.
    #[error("equilibrium measure is not unique: {components} components share the spectral radius")]
    NonUniqueEquilibrium { components: usize },

    /// Spectral potential is `-inf` where a finite value is required.
    #[error("operator is nilpotent")]
    Nilpotent,

    /// Column `state` of the n-step matrix vanishes while the measure
    /// charges it.
    #[error("null column at state {state}")]
    NullColumn { state: usize },

    #[error("entropy oracle is -inf at every start")]
    NoFeasibleMeasure,

    #[error("adjacency matrix is reducible")]
    Reducible,

    #[error("singular linear system")]
    Singular,

    #[error("inconsistent results: {0}")]
    Inconsistent(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
