//! Metric depth from relative monocular depth.
//!
//! A relative depth map is backprojected through the pinhole intrinsics, a
//! surface normal is estimated for every pixel from its 8-neighborhood, and
//! pixels whose normal is close to the ideal ground normal `(0, 1, 0)` are
//! taken as ground. Every ground point yields one camera height estimate
//! (the projection of the point onto its normal); the median of those
//! estimates against the known mounting height gives the scale factor.
//!
//! Camera coordinates are y-down: `x` right, `y` down, `z` forward. Ground
//! below the camera therefore has positive `y`.
//!
//! The crate also carries the self-supervision losses used to train such
//! depth networks ([`photometric`]), the standard depth benchmark metrics
//! ([`evaluation`]) and an analytic scene generator ([`synthetic`]) used as
//! the test oracle throughout.

// `!(x >= t)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod depth;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod grid;
pub mod photometric;
pub mod stats;
pub mod synthetic;

pub use nalgebra;

pub use camera::CameraIntrinsics;
pub use depth::{DepthKind, DepthMap};
pub use error::{EvalError, GeometryError, PhotometricError};
pub use geometry::{
    backproject, camera_heights, compute_normal_map, detect_ground, dgc_pipeline,
    estimate_camera_height, ground_similarity, normal_at, recover_absolute, scale_factor,
    DgcConfig, DgcOutput, GroundMask, HeightSample, HeightSamples, NormalMap, PointGrid,
    ScaleEstimate,
};
pub use grid::Grid;
