use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse grouping used by front ends to map errors onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: parameters, configuration, files.
    Config,
    /// A numerical procedure failed to converge or was ill-conditioned.
    Numeric,
    /// The request is outside the physical model's domain.
    ModelDomain,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("branch at junction phase {phase:.6} rad is not a stable minimum")]
    UnstableBranch { phase: f64 },

    #[error("well too shallow: {bound_levels} level(s) below the barrier, need 3 plus room for a fourth")]
    WellTooShallow { bound_levels: usize },

    #[error("{what} = {value:e} outside the allowed range [{lo:e}, {hi:e}]")]
    OutOfRange { what: &'static str, value: f64, lo: f64, hi: f64 },

    #[error("three-level dispersive shift has a pole at detuning = -anharmonicity")]
    StraddlingBoundary,

    #[error("dispersive shift undefined at zero detuning")]
    ZeroDetuning,

    #[error("|detuning| = {detuning:e} rad/s is below g = {coupling:e} rad/s; qubit and cavity are hybridized")]
    OnResonance { detuning: f64, coupling: f64 },

    #[error("fewer than two stable qubit branches at the readout flux")]
    SingleBranch,

    #[error("empty flux grid")]
    EmptyGrid,

    #[error("schedule segment {index} is hybridized (|detuning| < g)")]
    HybridizedSegment { index: usize },

    #[error("schedule segment {index} has no usable qubit well: {reason}")]
    UnstableBias { index: usize, reason: String },

    #[error("sweep spans {periods:.2} flux periods; at least 2 required")]
    InsufficientSpan { periods: f64 },

    #[error("Jacobian is singular; degenerate parameter direction {direction:?}")]
    SingularJacobian { direction: Vec<(String, f64)> },

    #[error("optimizer reached the iteration cap ({0})")]
    MaxIterations(usize),

    #[error("model evaluation failed at {dropped} of {total} points")]
    ModelEvalFailure { dropped: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidParameter { .. } | Config(_) | Io(_) | Csv(_) => ErrorClass::Config,
            NoConvergence { .. }
            | SingularJacobian { .. }
            | MaxIterations(_)
            | ModelEvalFailure { .. }
            | InsufficientSpan { .. } => ErrorClass::Numeric,
            UnstableBranch { .. }
            | WellTooShallow { .. }
            | OutOfRange { .. }
            | StraddlingBoundary
            | ZeroDetuning
            | OnResonance { .. }
            | SingleBranch
            | EmptyGrid
            | HybridizedSegment { .. }
            | UnstableBias { .. } => ErrorClass::ModelDomain,
        }
    }
}
