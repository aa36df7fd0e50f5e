use thiserror::Error;

use crate::dynamics::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("size mismatch: expected {expected} points, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("step mismatch: {0} vs {1}")]
    StepMismatch(f64, f64),
    #[error("resolution mismatch: fine grid of {fine} points cannot fold onto {coarse}")]
    ResolutionMismatch { fine: usize, coarse: usize },
    #[error("stencil of half width {half_width} is too wide for {n_points} points")]
    StencilTooWide { half_width: usize, n_points: usize },
    #[error("stencil is not stable (alpha = {alpha:.3e})")]
    UnstableStencil { alpha: f64 },
    #[error("invalid wave parameters: xi1 = {xi1} must exceed (xi2/2)^2 = {bound}")]
    InvalidParams { xi1: f64, bound: f64 },
    #[error("domain too small: m*L = {ml:.2} < {required}")]
    DomainTooSmall { ml: f64, required: f64 },
    #[error("boost by {v} is not a whole number of modes on a period of {length}")]
    BoostNotCommensurate { v: f64, length: f64 },
    #[error("boost by {v} pushes energy out of the band")]
    BandOverflow { v: f64 },
    #[error("Newton iteration did not converge: residual {residual:.3e} after {iters} iterations")]
    NoConvergence { residual: f64, iters: usize },
    #[error("symmetry violation: imaginary leakage {leak:.3e}")]
    SymmetryViolation { leak: f64 },
    #[error("mass bracket failure: {0}")]
    BracketFailure(String),
    #[error("non-finite value at t = {time}")]
    NonFinite { time: f64, partial: Box<Trajectory> },
    #[error("orbit projection diverged{}", frame.map(|f| format!(" at frame {f}")).unwrap_or_default())]
    ProjectionDiverged { frame: Option<usize>, time: Option<f64> },
    #[error("modulation matrix is singular (det = {det:.3e})")]
    SingularA { det: f64 },
    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy { kind: &'static str, name: String, known: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NonFinite { .. }
                | Error::SymmetryViolation { .. }
                | Error::ProjectionDiverged { .. }
                | Error::SingularA { .. }
                | Error::BracketFailure(_)
        )
    }
}
