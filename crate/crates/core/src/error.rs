use thiserror::Error;

pub type Result<T, E = CdtError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CdtError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("site index {index} out of range for {n_sites} sites")]
    SiteOutOfRange { index: usize, n_sites: usize },

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("time step {dt} exceeds the resolution limit {limit} (drive period / 200)")]
    StepTooCoarse { dt: f64, limit: f64 },

    #[error("non-finite amplitude encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("one-period propagator is not unitary (deviation {deviation:.3e}); reduce the step size")]
    NotUnitary { deviation: f64 },

    #[error("field norm drifted by {drift:.3e} (limit {limit:.1e}); grid too coarse")]
    NormDrift { drift: f64, limit: f64 },

    #[error("boundary reflection: power {power:.3e} near the domain edge at z = {z}")]
    BoundaryReflection { power: f64, z: f64 },

    #[error("no bound state found (lowest eigenvalue {eigenvalue:.3e}); index contrast or width too small")]
    NoBoundState { eigenvalue: f64 },

    #[error("guide modes not separated from the continuum (eigenvalue {eigenvalue:.3e})")]
    NotSeparated { eigenvalue: f64 },

    #[error("invalid configuration key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CdtError {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        CdtError::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        CdtError::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical guard (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CdtError::NonFinite { .. }
                | CdtError::NotUnitary { .. }
                | CdtError::NormDrift { .. }
                | CdtError::BoundaryReflection { .. }
                | CdtError::NoBoundState { .. }
                | CdtError::NotSeparated { .. }
        )
    }
}
