use thiserror::Error;

/// Errors raised across the library. Numerical failures that are data (near
/// singularity, slow convergence) are reported in result structs instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("form is not antisymmetric (max defect {defect:.3e})")]
    NotAntisymmetric { defect: f64 },

    #[error("cocycle identity fails on basis triple ({i}, {j}, {k}) with residual {residual:.3e}")]
    CocycleViolation {
        i: usize,
        j: usize,
        k: usize,
        residual: f64,
    },

    #[error("invalid Lie algebra: {0}")]
    InvalidAlgebra(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("top-degree cochain has no differential")]
    TopDegree,

    #[error("complex has no boundary")]
    NoBoundary,

    #[error("incompatible boundary data: residual {residual:.3e} against a kernel vector")]
    Incompatible { residual: f64, kernel: Vec<f64> },

    #[error("configuration is off-shell (constraint residual {0:.3e})")]
    OffShell(f64),

    #[error("element is outside the constraint ideal (distance {0:.3e})")]
    OutsideIdeal(f64),

    #[error("flux is not on the orbit of the reference value (Casimir mismatch {0:.3e})")]
    NotOnOrbit(f64),

    #[error("principal logarithm branch violated (angle {0:.6})")]
    LogBranch(f64),

    #[error("flow integration failed after {steps} steps: {reason}")]
    FlowFailure { steps: usize, reason: String },

    #[error("empty sample set")]
    EmptySamples,

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("model `{model}` does not support {what}")]
    Unsupported { model: String, what: String },

    #[error("unknown check `{0}`")]
    UnknownCheck(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("polynomial degree cap exceeded")]
    DegreeCap,

    #[error("expected ghost degree {expected}, got {got}")]
    GhostDegree { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
