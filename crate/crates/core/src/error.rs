use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("normal is not unit length (norm {0})")]
    NonUnitNormal(f64),
    #[error("no ground detected (ground ratio {ground_ratio}, {found} samples, {required} required)")]
    NoGround {
        ground_ratio: f64,
        found: usize,
        required: usize,
    },
    #[error("depth map is already absolute")]
    AlreadyAbsolute,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhotometricError {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("rotation is not orthonormal")]
    InvalidRotation,
    #[error("candidate list is empty")]
    NoCandidates,
    #[error("depth map contains non-positive or invalid pixels")]
    NonPositiveDepth,
    #[error("expected {expected} scales, got {got}")]
    ScaleCountMismatch { expected: usize, got: usize },
    #[error("invalid weight {name}: {value}")]
    InvalidWeight { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("no valid ground-truth pixels to evaluate")]
    NoValidPixels,
    #[error("prediction must be absolute depth")]
    RelativePrediction,
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
