use thiserror::Error;

/// Errors raised across the solver, diagnostics and free-boundary pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("boundary data {data} lies below the obstacle {obstacle} at fixed node {node}")]
    InfeasibleBoundary { node: usize, data: f64, obstacle: f64 },

    #[error("projected relaxation did not converge after {iterations} sweeps (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("ball of radius {r} around the center leaves the grid (largest admissible radius {limit})")]
    RadiusOutOfDomain { r: f64, limit: f64 },

    #[error("center {0:?} lies outside the trace plane of the grid")]
    CenterOutsideGrid(Vec<f64>),

    #[error("H({r}) = {h:e} is below the degeneracy floor")]
    DegenerateH { r: f64, h: f64 },

    #[error("need at least {need} radii, have {have}")]
    TooFewRadii { have: usize, need: usize },

    #[error("normal equations of the quadratic fit are rank deficient")]
    RankDeficientFit,

    #[error("fitted blow-up matrix vanishes (all eigenvalues below tolerance)")]
    VanishingBlowup,

    #[error("no free boundary point available")]
    NoFreeBoundaryPoint,

    #[error("point {0:?} is not in the continuation region")]
    NotInContinuation(Vec<f64>),

    #[error("strategy requires a contact mask")]
    MissingContactMask,

    #[error("Monte Carlo run requested with zero paths")]
    ZeroPaths,

    #[error("schema version mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: u32, found: u32 },

    #[error("malformed artifact: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
