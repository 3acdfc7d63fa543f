use thiserror::Error;

/// Errors raised while validating or running a simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    /// A configured value violates its documented range.
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    /// A lookup into shipped configuration (e.g. the sensitivity table) failed.
    #[error("configuration error: {0}")]
    Config(String),

    /// Geometry that has no defined answer, such as a zero-length link.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A metric was requested that is undefined for the given inputs.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// The engine detected a broken internal invariant; the run is aborted.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl SimError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        SimError::Validation {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by user input rather than by the engine.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            SimError::Validation { .. } | SimError::Config(_) | SimError::Geometry(_)
        )
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
