use num_complex::Complex64;
use thiserror::Error;

/// Errors shared by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field is on the {found:?} side, expected {expected:?}")]
    SideMismatch {
        expected: crate::fields::Side,
        found: crate::fields::Side,
    },

    #[error("point {point:?} lies outside the safe interpolation region")]
    OutsideSafeRegion { point: [f64; 3] },

    #[error(
        "box margin violated: exp(-Im k * L/4) = {factor:.3e} exceeds {tol:.3e} for k = {k}"
    )]
    MarginViolation { k: Complex64, factor: f64, tol: f64 },

    #[error("evaluation at the kernel singularity x = y")]
    SingularPoint,

    #[error("non-finite sample encountered while scanning a field")]
    NonFiniteSample,

    #[error(
        "linear solver did not reach tol {tol:.3e} in {iterations} iterations (residual {residual:.3e})"
    )]
    SolverDidNotConverge {
        tol: f64,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("radius ladder is not converging: {details}")]
    LadderNotConverging { details: String },

    #[error("contour quadrature did not stabilize below {tol:.3e} (last change {change:.3e})")]
    QuadratureNotConverging { tol: f64, change: f64 },

    #[error("operation unsupported for this configuration: {0}")]
    Unsupported(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
