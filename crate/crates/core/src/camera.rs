use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Pinhole intrinsics in pixels.
///
/// Pixel `(row, col)` maps to the homogeneous image point `[col, row, 1]`;
/// the camera frame is y-down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    /// Checks the focal lengths and that the principal point is finite.
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx.is_finite() && self.fx > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "fx must be positive, got {}",
                self.fx
            )));
        }
        if !(self.fy.is_finite() && self.fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "fy must be positive, got {}",
                self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics(
                "principal point must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Checks [`validate`](Self::validate) plus that the principal point
    /// lies inside a `width × height` image.
    pub fn validate_for(&self, width: usize, height: usize) -> Result<(), GeometryError> {
        self.validate()?;
        if !(0.0..width as f64).contains(&self.cx) || !(0.0..height as f64).contains(&self.cy) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {width}x{height} image",
                self.cx, self.cy
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    /// Ray `K⁻¹ [col, row, 1]ᵀ`; its z component is exactly 1.
    #[inline]
    pub fn ray(&self, row: f64, col: f64) -> Vector3<f64> {
        Vector3::new((col - self.cx) / self.fx, (row - self.cy) / self.fy, 1.0)
    }

    /// The 3D point at `depth` along the ray of pixel `(row, col)`.
    #[inline]
    pub fn backproject_pixel(&self, row: f64, col: f64, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (col - self.cx) * depth / self.fx,
            (row - self.cy) * depth / self.fy,
            depth,
        )
    }

    /// Projects a camera-frame point to `(row, col)`; `None` when `z <= 0`.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((
            self.fy * p.y / p.z + self.cy,
            self.fx * p.x / p.z + self.cx,
        ))
    }
}
