use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: field has {found} values, grid has {expected} nodes")]
    GridMismatch { expected: usize, found: usize },

    #[error("operation requires {required} boundary mode")]
    WrongBoundaryMode { required: &'static str },

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate state: 1 - delta*vel = {factor:e} at node {node}")]
    DegenerateState { node: usize, factor: f64 },

    #[error(
        "closed-form radicand {radicand:e} below floor at node {node}; \
         step must not exceed h_max = {h_max:e}"
    )]
    RadicandNonpositive {
        node: usize,
        radicand: f64,
        h_max: f64,
    },

    #[error("Newton iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("blowup detected: {0}")]
    BlowupDetected(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "reference self-consistency failed: refinement difference {difference:e} \
         exceeds 1% of smallest error {smallest_error:e}"
    )]
    SelfConsistencyFailure {
        difference: f64,
        smallest_error: f64,
    },
}

impl Error {
    /// True for failures produced by the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateState { .. }
                | Error::RadicandNonpositive { .. }
                | Error::NewtonDivergence { .. }
                | Error::BlowupDetected(_)
                | Error::NonFinite { .. }
                | Error::SelfConsistencyFailure { .. }
        )
    }

    /// Short tag used in CSV failure columns.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::DegenerateState { .. } | Error::RadicandNonpositive { .. } => "degenerate",
            Error::NewtonDivergence { .. } => "newton",
            Error::BlowupDetected(_) | Error::NonFinite { .. } => "blowup",
            Error::SelfConsistencyFailure { .. } => "reference",
            _ => "error",
        }
    }
}
