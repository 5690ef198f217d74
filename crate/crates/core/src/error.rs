use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("(c, h) = ({c}, {h}) is not unitary: gram eigenvalue {eigenvalue:.3e} at level {level}")]
    NonUnitary { c: f64, h: f64, level: usize, eigenvalue: f64 },

    #[error("field mode {mode} exceeds module cutoff {cutoff}")]
    ModeOutOfRange { mode: usize, cutoff: usize },

    #[error("field is not inward pointing: margin {margin:.3e} (at t = {t})")]
    NotInward { margin: f64, t: f64 },

    #[error("degenerate framing: min |h_theta| = {min_h_theta:.3e}")]
    DegenerateFraming { min_h_theta: f64 },

    #[error("mode truncation tail {tail:.3e} exceeds allowance {allowed:.3e}")]
    ModeOverflow { tail: f64, allowed: f64 },

    #[error("boundary mismatch {residual:.3e} exceeds tolerance {tol:.3e}")]
    BoundaryMismatch { residual: f64, tol: f64 },

    #[error("intermediate curve is not nested between the boundary curves (margin {margin:.3e})")]
    NotNested { margin: f64 },

    #[error("step size underflow at t = {t}, h = {h:.3e}")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite entries produced ({0})")]
    NonFinite(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
