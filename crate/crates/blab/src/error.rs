use thiserror::Error;

/// Errors produced by model construction and the numerical operations.
#[derive(Debug, Error)]
pub enum BlabError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("point outside chart of {map} at iterate {iterate}: |{coord}| = {value:.6e} > {radius}")]
    ChartEscape {
        map: &'static str,
        iterate: usize,
        coord: &'static str,
        value: f64,
        radius: f64,
    },

    #[error("point outside the return box: |{coord}| = {value:.6e} > {bound:.6e}")]
    BoxViolation {
        coord: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("tangent singularity: |cos(m*omega2 + eta3)| = {value:.3e} below threshold {threshold:.3e}")]
    TangentSingularity { value: f64, threshold: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("contraction violated: measured Lipschitz estimate {lipschitz:.6} >= 1")]
    NotContracting { lipschitz: f64 },

    #[error("near-parabolic return map: |1 - A_km| = {value:.3e} < {tol:.3e}")]
    NearParabolic { value: f64, tol: f64 },

    #[error("empty coding")]
    EmptyCoding,

    #[error("no realization found for target rho = {rho:.6} within k_max = {k_max} (best miss {best_miss:.3e})")]
    NoRealization { rho: f64, k_max: u64, best_miss: f64 },

    #[error("covering margin failed: disc central range [{lo:.6e}, {hi:.6e}] fits no interval with margin {margin:.3e}")]
    CoveringMargin { lo: f64, hi: f64, margin: f64 },

    #[error("root bracketing failed on [{lo:.6e}, {hi:.6e}]: residual has the same sign at both ends")]
    BracketingFailed { lo: f64, hi: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no valid samples: {0}")]
    NoSamples(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BlabError>;
