use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {coords:?} is outside the domain of {manifold}")]
    Domain { manifold: String, coords: Vec<f64> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown manifold `{0}`")]
    UnknownManifold(String),

    #[error("unknown vector field `{0}`")]
    UnknownField(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("integrator exceeded {0} steps")]
    StepLimitExceeded(usize),

    #[error("flow is incomplete: sample {tau_index} leaves the domain at t = {time}")]
    IncompleteFlow { tau_index: usize, time: f64 },

    #[error("index ({0}, {1}) is not an interior grid index")]
    Index(usize, usize),

    #[error("no admissible path between {p:?} and {q:?}")]
    NoPathFound { p: Vec<f64>, q: Vec<f64> },

    #[error("trajectories do not share a time grid")]
    GridMismatch,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("cannot parse expression: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
