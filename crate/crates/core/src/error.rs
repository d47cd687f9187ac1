use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite state")]
    NonFiniteState,
    #[error("state blow-up")]
    StateBlowUp,
    #[error("implicit solve failed: residual {residual:e} after {iterations} iterations")]
    ImplicitSolveFailed { residual: f64, iterations: usize },
    #[error("split-step contraction condition violated: delta * lipschitz = {0} > 0.5")]
    ContractionViolated(f64),
    #[error("requires constant diffusion")]
    RequiresConstantDiffusion,
    #[error("reference too coarse: substep {reference:e} > delta^(p+1) = {bound:e}")]
    ReferenceTooCoarse { reference: f64, bound: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("need >= 2 blocks, got {0}")]
    TooFewBlocks(usize),
    #[error("extrapolation order must be >= 1, got {0}")]
    InvalidOrder(u32),
    #[error("not a gradient problem: {0}")]
    NotGradientProblem(&'static str),
    #[error("no spectral gap at cutoff {cutoff}: second-smallest singular value {sigma:e}")]
    NoSpectralGap { cutoff: usize, sigma: f64 },
    #[error("singular system: right-hand side projection onto null space {0:e}")]
    SingularSystem(f64),
    #[error("all points noise-dominated: {usable} usable grid points, need 3")]
    NoiseDominated { usable: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown {kind} id '{id}'")]
    UnknownId { kind: &'static str, id: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by bad inputs rather than by the numerics.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::ContractionViolated(_)
                | Error::RequiresConstantDiffusion
                | Error::ReferenceTooCoarse { .. }
                | Error::EmptyInput
                | Error::TooFewBlocks(_)
                | Error::InvalidOrder(_)
                | Error::NotGradientProblem(_)
                | Error::DimensionMismatch { .. }
                | Error::UnknownId { .. }
                | Error::InvalidArgument(_)
                | Error::InvalidConfig(_)
                | Error::Json(_)
        )
    }
}
