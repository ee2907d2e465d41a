//! Dense geometric constraint: relative depth plus a known camera mounting
//! height gives the metric scale.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::depth::{DepthKind, DepthMap};
use crate::error::GeometryError;
use crate::grid::Grid;
use crate::stats;

pub type Vec3 = Vector3<f64>;

/// Normal of the ideal ground plane in y-down camera coordinates.
pub const GROUND_NORMAL: Vector3<f64> = Vector3::new(0.0, 1.0, 0.0);

/// Ground detection threshold, degrees.
pub const DEFAULT_S_MAX_DEG: f64 = 5.0;

/// Below this ground ratio the estimate is flagged low-confidence.
pub const DEFAULT_LOW_CONFIDENCE_RATIO: f64 = 0.0103;

/// Cross products shorter than this mark the pixel's normal invalid.
pub const DEGENERATE_CROSS_NORM: f64 = 1e-12;

const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// The four neighbor pairs `(drow, dcol)` around a pixel. Within a pair the
/// two offsets are perpendicular in the image; the set is point-symmetric so
/// each of the 8 neighbors is used exactly once.
const NEIGHBOR_PAIRS: [[(isize, isize); 2]; 4] = [
    [(1, 0), (0, -1)],
    [(1, -1), (-1, -1)],
    [(-1, 0), (0, 1)],
    [(-1, 1), (1, 1)],
];

/// Per-pixel camera-frame points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGrid {
    points: Grid<Option<Vector3<f64>>>,
}

impl PointGrid {
    pub fn from_grid(points: Grid<Option<Vector3<f64>>>) -> Self {
        Self { points }
    }

    pub fn width(&self) -> usize {
        self.points.width()
    }

    pub fn height(&self) -> usize {
        self.points.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.points.dims()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<Vector3<f64>> {
        *self.points.get(row, col)
    }

    pub fn grid(&self) -> &Grid<Option<Vector3<f64>>> {
        &self.points
    }

    pub fn valid_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_some()).count()
    }

    fn neighbor(&self, row: usize, col: usize, offset: (isize, isize)) -> Option<Vector3<f64>> {
        let r = row.checked_add_signed(offset.0)?;
        let c = col.checked_add_signed(offset.1)?;
        if r >= self.height() || c >= self.width() {
            return None;
        }
        self.get(r, c)
    }
}

/// Unit surface normals, y-component non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    normals: Grid<Option<Vector3<f64>>>,
}

impl NormalMap {
    pub fn from_grid(normals: Grid<Option<Vector3<f64>>>) -> Self {
        Self { normals }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.normals.dims()
    }

    pub fn width(&self) -> usize {
        self.normals.width()
    }

    pub fn height(&self) -> usize {
        self.normals.height()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<Vector3<f64>> {
        *self.normals.get(row, col)
    }

    pub fn grid(&self) -> &Grid<Option<Vector3<f64>>> {
        &self.normals
    }

    pub fn valid_count(&self) -> usize {
        self.normals.iter().filter(|n| n.is_some()).count()
    }
}

/// Pixels classified as ground.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundMask {
    mask: Grid<bool>,
    valid_pixels: usize,
}

impl GroundMask {
    /// `valid_pixels` is the denominator of [`ground_ratio`](Self::ground_ratio).
    pub fn new(mask: Grid<bool>, valid_pixels: usize) -> Self {
        Self { mask, valid_pixels }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        *self.mask.get(row, col)
    }

    pub fn grid(&self) -> &Grid<bool> {
        &self.mask
    }

    pub fn ground_pixel_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn valid_pixels(&self) -> usize {
        self.valid_pixels
    }

    /// Ground pixels over valid depth pixels; 0 when nothing is valid.
    pub fn ground_ratio(&self) -> f64 {
        if self.valid_pixels == 0 {
            0.0
        } else {
            self.ground_pixel_count() as f64 / self.valid_pixels as f64
        }
    }

    /// True when every ground pixel here is also ground in `other`.
    pub fn is_subset_of(&self, other: &GroundMask) -> bool {
        self.mask
            .iter()
            .zip(other.mask.iter())
            .all(|(&a, &b)| !a || b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightSample {
    pub row: usize,
    pub col: usize,
    pub height: f64,
}

/// One camera height per ground pixel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HeightSamples {
    pub samples: Vec<HeightSample>,
    /// Ratio of the mask the samples were drawn from.
    pub ground_ratio: f64,
}

impl HeightSamples {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn heights(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.height).collect()
    }
}

/// Outcome of scale recovery for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    /// Median per-point camera height, relative units.
    pub estimated_height: f64,
    /// Known mounting height, meters.
    pub real_height: f64,
    /// Meters per relative unit.
    pub scale_factor: f64,
    pub ground_ratio: f64,
    pub n_samples: usize,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgcConfig {
    pub s_max_deg: f64,
    pub low_confidence_ratio: f64,
    pub min_samples: usize,
}

impl Default for DgcConfig {
    fn default() -> Self {
        Self {
            s_max_deg: DEFAULT_S_MAX_DEG,
            low_confidence_ratio: DEFAULT_LOW_CONFIDENCE_RATIO,
            min_samples: 1,
        }
    }
}

impl DgcConfig {
    pub fn with_s_max(mut self, s_max_deg: f64) -> Self {
        self.s_max_deg = s_max_deg;
        self
    }
}

/// Every intermediate of [`dgc_pipeline`].
#[derive(Debug, Clone)]
pub struct DgcOutput {
    pub absolute: DepthMap,
    pub estimate: ScaleEstimate,
    pub mask: GroundMask,
    pub normals: NormalMap,
    pub points: PointGrid,
    pub samples: HeightSamples,
}

/// `P = D · K⁻¹ [col, row, 1]ᵀ` for every valid pixel.
pub fn backproject(depth: &DepthMap, k: &CameraIntrinsics) -> Result<PointGrid, GeometryError> {
    k.validate_for(depth.width(), depth.height())?;
    let points = Grid::from_fn(depth.width(), depth.height(), |row, col| {
        depth
            .get(row, col)
            .map(|d| k.backproject_pixel(row as f64, col as f64, d))
    });
    Ok(PointGrid { points })
}

#[inline]
fn orient(n: Vector3<f64>) -> Vector3<f64> {
    if n.y < 0.0 {
        -n
    } else {
        n
    }
}

/// Surface normal at an interior pixel from its four neighbor pairs.
///
/// Each pair spans a local plane whose normal is the cross product of the
/// two difference vectors. The four unit normals are averaged and the mean
/// renormalized. `None` on the border, next to an invalid neighbor, or when
/// any cross product is degenerate.
pub fn normal_at(grid: &PointGrid, row: usize, col: usize) -> Option<Vector3<f64>> {
    if row == 0 || col == 0 || row + 1 >= grid.height() || col + 1 >= grid.width() {
        return None;
    }
    let center = grid.get(row, col)?;
    let mut sum = Vector3::zeros();
    for [a, b] in NEIGHBOR_PAIRS {
        let va = grid.neighbor(row, col, a)? - center;
        let vb = grid.neighbor(row, col, b)? - center;
        let n = va.cross(&vb);
        let norm = n.norm();
        if !(norm >= DEGENERATE_CROSS_NORM) {
            return None;
        }
        sum += orient(n / norm);
    }
    let mean = sum / 4.0;
    let norm = mean.norm();
    if !(norm >= DEGENERATE_CROSS_NORM) {
        return None;
    }
    Some(orient(mean / norm))
}

pub fn compute_normal_map(grid: &PointGrid) -> NormalMap {
    let normals = Grid::from_fn(grid.width(), grid.height(), |row, col| {
        normal_at(grid, row, col)
    });
    NormalMap { normals }
}

/// Angle in degrees between a unit normal and the ideal ground normal.
pub fn ground_similarity(n: &Vector3<f64>) -> Result<f64, GeometryError> {
    let norm = n.norm();
    if !((norm - 1.0).abs() <= UNIT_NORM_TOLERANCE) {
        return Err(GeometryError::NonUnitNormal(norm));
    }
    Ok(similarity_deg(n))
}

#[inline]
fn similarity_deg(n: &Vector3<f64>) -> f64 {
    // atan2 keeps full precision near 0° where acos(y) does not
    let off_axis = n.x.hypot(n.z);
    off_axis.atan2(n.y).abs().to_degrees()
}

fn check_dims(expected: (usize, usize), got: (usize, usize)) -> Result<(), GeometryError> {
    if expected != got {
        return Err(GeometryError::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn check_s_max(s_max_deg: f64) -> Result<(), GeometryError> {
    if !(s_max_deg > 0.0 && s_max_deg < 90.0) {
        return Err(GeometryError::InvalidParameter {
            name: "s_max_deg",
            value: s_max_deg,
        });
    }
    Ok(())
}

/// Ground where the normal is valid, within `s_max_deg` of the ideal ground
/// normal, and the point lies below the camera (`y > 0`).
pub fn detect_ground(
    normals: &NormalMap,
    points: &PointGrid,
    s_max_deg: f64,
) -> Result<GroundMask, GeometryError> {
    check_dims(points.dims(), normals.dims())?;
    check_s_max(s_max_deg)?;
    let mask = Grid::from_fn(points.width(), points.height(), |row, col| {
        match (normals.get(row, col), points.get(row, col)) {
            (Some(n), Some(p)) => similarity_deg(&n) < s_max_deg && p.y > 0.0,
            _ => false,
        }
    });
    Ok(GroundMask {
        mask,
        valid_pixels: points.valid_count(),
    })
}

/// `h = N(P)ᵀ P` for every ground pixel.
pub fn camera_heights(
    points: &PointGrid,
    normals: &NormalMap,
    mask: &GroundMask,
) -> Result<HeightSamples, GeometryError> {
    check_dims(points.dims(), normals.dims())?;
    check_dims(points.dims(), mask.dims())?;
    let samples = mask
        .grid()
        .indexed()
        .filter(|(_, _, &m)| m)
        .filter_map(|(row, col, _)| {
            let p = points.get(row, col)?;
            let n = normals.get(row, col)?;
            Some(HeightSample {
                row,
                col,
                height: n.dot(&p),
            })
        })
        .collect();
    Ok(HeightSamples {
        samples,
        ground_ratio: mask.ground_ratio(),
    })
}

/// Median camera height of the samples.
pub fn estimate_camera_height(
    samples: &HeightSamples,
    min_samples: usize,
) -> Result<f64, GeometryError> {
    let required = min_samples.max(1);
    if samples.len() < required {
        return Err(GeometryError::NoGround {
            ground_ratio: samples.ground_ratio,
            found: samples.len(),
            required,
        });
    }
    let mut heights = samples.heights();
    Ok(stats::median_in_place(&mut heights).expect("non-empty"))
}

/// `f = h_real / h_estimated`.
pub fn scale_factor(real_height: f64, estimated_height: f64) -> Result<f64, GeometryError> {
    if !(real_height.is_finite() && real_height > 0.0) {
        return Err(GeometryError::InvalidParameter {
            name: "real_height",
            value: real_height,
        });
    }
    if !(estimated_height.is_finite() && estimated_height > 0.0) {
        return Err(GeometryError::InvalidParameter {
            name: "estimated_height",
            value: estimated_height,
        });
    }
    Ok(real_height / estimated_height)
}

/// Scales a relative map to metric depth.
pub fn recover_absolute(depth: &DepthMap, scale: f64) -> Result<DepthMap, GeometryError> {
    if depth.kind() == DepthKind::Absolute {
        return Err(GeometryError::AlreadyAbsolute);
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(GeometryError::InvalidParameter {
            name: "scale_factor",
            value: scale,
        });
    }
    Ok(depth.scaled(scale, DepthKind::Absolute))
}

/// Full scale recovery: backproject, normals, ground mask, per-point
/// heights, median, scale factor, absolute depth.
pub fn dgc_pipeline(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    real_height: f64,
    config: &DgcConfig,
) -> Result<DgcOutput, GeometryError> {
    if depth.kind() == DepthKind::Absolute {
        return Err(GeometryError::AlreadyAbsolute);
    }
    check_s_max(config.s_max_deg)?;
    if !(real_height.is_finite() && real_height > 0.0) {
        return Err(GeometryError::InvalidParameter {
            name: "real_height",
            value: real_height,
        });
    }
    let points = backproject(depth, k)?;
    let normals = compute_normal_map(&points);
    let mask = detect_ground(&normals, &points, config.s_max_deg)?;
    let samples = camera_heights(&points, &normals, &mask)?;
    let estimated_height = estimate_camera_height(&samples, config.min_samples)?;
    let ground_ratio = mask.ground_ratio();
    let scale = match scale_factor(real_height, estimated_height) {
        Ok(f) => f,
        // a non-positive median means the ground normals point the wrong way
        Err(_) => {
            return Err(GeometryError::NoGround {
                ground_ratio,
                found: samples.len(),
                required: config.min_samples.max(1),
            })
        }
    };
    let absolute = recover_absolute(depth, scale)?;
    let estimate = ScaleEstimate {
        estimated_height,
        real_height,
        scale_factor: scale,
        ground_ratio,
        n_samples: samples.len(),
        low_confidence: ground_ratio < config.low_confidence_ratio,
    };
    Ok(DgcOutput {
        absolute,
        estimate,
        mask,
        normals,
        points,
        samples,
    })
}
