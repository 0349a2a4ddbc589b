use thiserror::Error;

/// Errors surfaced by the library. Numerical routines report the residual or
/// bracket they got stuck at so runs can be diagnosed from logs alone.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field contains NaN or Inf")]
    NonFinite,

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("dual element stored in the wrong representation for this triple")]
    RepresentationMismatch,

    #[error("bracket expansion failed for the scalar inclusion at s = {point} (radius {radius})")]
    BracketFailure { point: f64, radius: f64 },

    #[error("{what} did not converge (residual {residual:.3e})")]
    SolverNonConvergence { what: String, residual: f64 },

    #[error("Newton continuation diverged at stage μ = {stage:.3e} (residual {residual:.3e})")]
    NewtonDiverged { stage: f64, residual: f64 },

    #[error("time step rejected {rejections} times at t = {time:.6} (‖X‖_H = {norm_h:.3e})")]
    StepRejected { time: f64, rejections: u32, norm_h: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Error {
        Error::InvalidParameter(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Error {
        Error::Config(msg.into())
    }
}
