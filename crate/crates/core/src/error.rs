use thiserror::Error;

/// Errors surfaced by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("dual domain too small on axis {axis}: gradient value {value} outside [{lo}, {hi}]")]
    DualDomainTooSmall {
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("point {0:?} outside the interior margin of the grid")]
    OutsideInterior(Vec<f64>),

    #[error("target gradient {0:?} outside the discrete gradient range")]
    GradientOutOfRange(Vec<f64>),

    #[error("Newton iteration did not converge in {steps} steps (residual {residual:.3e})")]
    NewtonDiverged { steps: usize, residual: f64 },

    #[error("function is not strictly convex (min margin {min_margin:.3e} at node {argmin:?})")]
    NotStrictlyConvex { min_margin: f64, argmin: Vec<usize> },

    #[error("moment image violates polytope: gradient value {value:?} escapes P")]
    MomentImageViolatesPolytope { value: Vec<f64> },

    #[error("Moser map not invertible at s = {s}")]
    MoserNotInvertible { s: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("spacetime function is not jointly convex (cell {cell:?}, margin {margin:.3e})")]
    NotJointlyConvex { cell: Vec<usize>, margin: f64 },

    #[error("gradient of eta escapes the dual grid at sample {point:?} (admissibility violation)")]
    GradientEscapesDual { point: Vec<f64> },

    #[error("window mismatch: {0}")]
    WindowMismatch(String),

    #[error("sample count must be a power of two and at least 64, got {0}")]
    BadSampleCount(usize),

    #[error("insufficient resolution: spectral fit band is empty")]
    InsufficientResolution,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
