use thiserror::Error;

/// Failures raised by the construction and verification pipeline.
///
/// Several variants are recoverable: the pipeline's retry ladder reacts to
/// [`Error::is_retryable`] by shrinking the perturbation radius.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid arc: {0}")]
    InvalidArc(String),
    #[error("invalid homeomorphism: {0}")]
    InvalidHomeo(String),
    #[error("piece {piece} has zero slope; preimages are not finite")]
    ZeroSlopePiece { piece: usize },
    #[error("sample spacing {spacing} cannot certify closeness {epsilon} (interpolation error {bound})")]
    ResolutionTooCoarse { spacing: f64, epsilon: f64, bound: f64 },
    #[error("no m <= {horizon} certifies the averaging threshold {threshold}")]
    MZeroNotFound { horizon: usize, threshold: f64 },
    #[error("no return set K_k is non-empty at this resolution")]
    EmptyReturnSet,
    #[error("no non-negative return found: {0}")]
    NotFound(String),
    #[error("branch count exceeded cap {cap} at period {period}")]
    BranchExplosion { cap: usize, period: usize },
    #[error("linear program infeasible: {0}")]
    LpInfeasible(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("no preimage of q0 reaches the optimal average")]
    EmptyPreimageSet,
    #[error("delta bisection reached resolution {resolution}")]
    DeltaCollapse { resolution: f64 },
    #[error("no admissible alpha in W0")]
    NoValidAlpha,
    #[error("tube around the segment does not fit inside I")]
    SupportOverflow,
    #[error("return-average oscillation P(R1) = {0} is below slack")]
    FlatP(f64),
    #[error("radius map is not increasing: {0}")]
    MonotonicityBreak(String),
    #[error("periodicity lost: |f^n(p) - p| = {residual}")]
    PeriodicityLost { residual: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{context}: {message}")]
    Io { context: String, message: String },
}

impl Error {
    /// Errors that the pipeline answers by shrinking epsilon and rerunning.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGeometry(_)
                | Error::NotFound(_)
                | Error::EmptyReturnSet
                | Error::EmptyPreimageSet
                | Error::DeltaCollapse { .. }
                | Error::NoValidAlpha
                | Error::SupportOverflow
                | Error::PeriodicityLost { .. }
                | Error::MZeroNotFound { .. }
                | Error::BranchExplosion { .. }
                | Error::MonotonicityBreak(_)
        )
    }

    pub(crate) fn io(context: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Error::Io { context: context.into(), message: err.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
