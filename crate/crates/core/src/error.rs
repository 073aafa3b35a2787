use thiserror::Error;

/// Errors produced by the library and the command-line harness.
#[derive(Debug, Error)]
pub enum Error {
    /// The logarithm was requested at (or too close to) the cut locus.
    #[error("rotation angle {angle} rad is too close to pi; logarithm is ill-conditioned")]
    AngleNearPi { angle: f64 },

    #[error("matrix is not a rotation: orthogonality defect {orthogonality:e}, det {det}")]
    NotARotation { orthogonality: f64, det: f64 },

    #[error("drift parameter is not antisymmetric (defect {defect:e})")]
    NotAntisymmetric { defect: f64 },

    #[error("noise model is not isotropic; this form requires sigma * orthonormal basis")]
    NonIsotropicNoise,

    #[error("Fréchet mean iteration did not converge after {iterations} iterations (last step {step_norm:e})")]
    NoConvergence { iterations: usize, step_norm: f64 },

    #[error("covariance blew up at t = {t}: {reason}")]
    CovarianceBlowup { t: f64, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status used by the CLI for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::NotAntisymmetric { .. } => 2,
            Error::Io(_) => 4,
            Error::Json(e) if e.is_io() => 4,
            Error::Json(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
