use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// The volume header uses a feature outside the supported NRRD subset.
    #[error("unsupported volume format in field `{field}`: {message}")]
    Format { field: String, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Forward simulation bent a segment to or past a right angle.
    #[error("over-deflection at segment {segment}: |alpha_sum| = {alpha_sum:.6} rad >= pi/2")]
    OverDeflection { segment: usize, alpha_sum: f64 },

    /// Backward simulation hit `cos(alpha_sum) <= eps`.
    #[error("singular configuration at backward step {step}: alpha_sum = {alpha_sum:.6} rad")]
    Singular { step: usize, alpha_sum: f64 },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("pairing error: {0}")]
    Pairing(String),
}

impl Error {
    pub(crate) fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    /// True for errors caused by malformed input files rather than by the algorithm.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_) | Error::Format { .. } | Error::Json(_) | Error::Csv(_) | Error::Pairing(_)
        )
    }
}
