use thiserror::Error;

pub type Result<T, E = CvnnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CvnnError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("spectral factorization failed: {0}")]
    Factorization(String),

    /// `e^{Re(mu_m) dt}` leaves the f64 range for at least one mode.
    #[error("amplitude overflow in mode {mode}: growth exponent {exponent:.3e} over dt = {dt_s} s")]
    AmplitudeOverflow { mode: usize, exponent: f64, dt_s: f64 },

    #[error("ill-conditioned inverse over {dt_s} s: kappa = exp({log_kappa:.3}) exceeds guard 1e12")]
    IllConditioned { dt_s: f64, log_kappa: f64 },

    #[error("undefined phase: node {node} has zero amplitude")]
    UndefinedPhase { node: usize },

    #[error("scheduling error: input due at t = {expected_s} s, state is at t = {actual_s} s")]
    Scheduling { expected_s: f64, actual_s: f64 },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("character {0:?} is not in the alphabet")]
    UnknownCharacter(char),

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("encoding failed: {0}")]
    Encoding(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CvnnError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CvnnError::InvalidParameter(msg.into())
    }

    pub fn is_conditioning(&self) -> bool {
        matches!(self, CvnnError::IllConditioned { .. })
    }
}
