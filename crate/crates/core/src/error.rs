use serde::Serialize;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Error {
    #[error("invalid spec: {detail}")]
    InvalidSpec { detail: String },
    #[error("domain error: {detail}")]
    Domain { detail: String },
    #[error("ambiguous classification: {detail}")]
    AmbiguousClassification { detail: String },
    #[error("not applicable: {detail}")]
    NotApplicable { detail: String },
    #[error("not rational: {detail}")]
    NotRational { detail: String },
    #[error("pole: {detail}")]
    Pole { detail: String },
    #[error("image leaves the cube: {detail}")]
    NoImageInCube { detail: String },
    #[error("fixed-point iteration did not converge after {iterations} steps")]
    NonConvergence { iterations: usize },
    #[error("insufficient samples: {found} of {wanted}")]
    InsufficientSamples { found: usize, wanted: usize },
    #[error("window exhausted: {found} of {wanted} found, best distance {best_distance:e}")]
    WindowExhausted {
        found: usize,
        wanted: usize,
        best_distance: f64,
    },
    #[error("coverage gap on [{lo:e}, {hi:e}]")]
    CoverageGap { lo: f64, hi: f64 },
    #[error("band violation: {detail}")]
    BandViolation { detail: String },
    #[error("simulation failure: disc {disc} at depth {depth}: {detail}")]
    SimulationFailure {
        disc: usize,
        depth: usize,
        detail: String,
    },
    #[error("certificates have the same kind")]
    KindMismatch,
    #[error("mu = {mu:e} lies outside every window")]
    OutsideWindows { mu: f64 },
}

impl Error {
    pub fn invalid(detail: impl Into<String>) -> Self {
        Error::InvalidSpec {
            detail: detail.into(),
        }
    }

    pub fn domain(detail: impl Into<String>) -> Self {
        Error::Domain {
            detail: detail.into(),
        }
    }

    pub fn not_applicable(detail: impl Into<String>) -> Self {
        Error::NotApplicable {
            detail: detail.into(),
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::WindowExhausted { .. } => 2,
            Error::CoverageGap { .. }
            | Error::BandViolation { .. }
            | Error::SimulationFailure { .. }
            | Error::InsufficientSamples { .. } => 3,
            _ => 1,
        }
    }
}
