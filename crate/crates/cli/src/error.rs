use dgc_core::{EvalError, GeometryError, PhotometricError};
use serde_json::json;
use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NO_GROUND: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("no ground detected (ground ratio {ground_ratio})")]
    NoGround { ground_ratio: f64 },
    #[error("{context}: {message}")]
    Io { context: String, message: String },
}

impl CliError {
    pub fn io(context: impl Into<String>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            context: context.into(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::NoGround { .. } => EXIT_NO_GROUND,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::NoGround { .. } => "no_ground",
            CliError::Io { .. } => "io",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut body = json!({
            "kind": self.kind(),
            "message": self.to_string(),
        });
        if let CliError::NoGround { ground_ratio } = self {
            body["ground_ratio"] = json!(ground_ratio);
        }
        json!({ "error": body })
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::NoGround { ground_ratio, .. } => CliError::NoGround { ground_ratio },
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<PhotometricError> for CliError {
    fn from(e: PhotometricError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Geometry(g) => g.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
