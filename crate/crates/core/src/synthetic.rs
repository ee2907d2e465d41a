//! Analytic scenes with closed-form depth, normals, ground labels and
//! camera height.
//!
//! Scene geometry lives in a ground-aligned frame whose ground plane is
//! `y = camera_height` (y-down). The camera sits at the origin pitched about
//! its x-axis, so in camera coordinates the ground normal is
//! `(0, cos pitch, sin pitch)`. The optional wall is frontal in the camera
//! frame (`z = wall_distance`).

use nalgebra::{Rotation3, Vector3};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::depth::{DepthKind, DepthMap};
use crate::error::GeometryError;
use crate::geometry::{GroundMask, NormalMap};
use crate::grid::Grid;
use crate::photometric::Image;

/// Degraded depths never drop below this.
pub const MIN_VALID_DEPTH: f64 = 1e-6;

/// Axis-aligned box in the ground-aligned frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxObstacle {
    pub center: [f64; 3],
    pub size: [f64; 3],
}

impl BoxObstacle {
    /// A box resting on the ground plane of a camera mounted at `camera_height`.
    pub fn on_ground(x: f64, z: f64, width: f64, height: f64, depth: f64, camera_height: f64) -> Self {
        Self {
            center: [x, camera_height - height / 2.0, z],
            size: [width, height, depth],
        }
    }

    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..3 {
            lo[a] = self.center[a] - self.size[a] / 2.0;
            hi[a] = self.center[a] + self.size[a] / 2.0;
        }
        (lo, hi)
    }

    /// Slab test. Returns the entry distance and the ground-frame face normal.
    fn intersect(&self, dir: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
        let (lo, hi) = self.bounds();
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        let mut axis = 0;
        for a in 0..3 {
            let d = dir[a];
            if d == 0.0 {
                if 0.0 < lo[a] || 0.0 > hi[a] {
                    return None;
                }
                continue;
            }
            let (t0, t1) = {
                let t0 = lo[a] / d;
                let t1 = hi[a] / d;
                if t0 <= t1 { (t0, t1) } else { (t1, t0) }
            };
            if t0 > t_near {
                t_near = t0;
                axis = a;
            }
            t_far = t_far.min(t1);
        }
        if t_near > t_far || t_near <= 0.0 {
            return None;
        }
        let mut n = Vector3::zeros();
        n[axis] = 1.0;
        Some((t_near, n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of the multiplicative Gaussian factor.
    pub sigma: f64,
    /// Fraction of pixels turned into outliers.
    pub outlier_fraction: f64,
    /// Multiplier applied to outlier pixels.
    pub outlier_scale: f64,
}

impl NoiseSpec {
    pub fn is_noop(&self) -> bool {
        self.sigma == 0.0 && (self.outlier_fraction == 0.0 || self.outlier_scale == 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics,
    /// Meters.
    pub camera_height: f64,
    /// Degrees.
    pub pitch_deg: f64,
    pub wall_distance: Option<f64>,
    /// Distance of a ceiling plane above the camera.
    pub ceiling_height: Option<f64>,
    /// When false only the explicit surfaces are rendered.
    pub ground: bool,
    pub boxes: Vec<BoxObstacle>,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl SceneSpec {
    /// 640×192 with KITTI-style normalized intrinsics and a 1.65 m camera.
    pub fn kitti_like() -> Self {
        Self {
            width: 640,
            height: 192,
            intrinsics: CameraIntrinsics {
                fx: 0.58 * 640.0,
                fy: 1.92 * 192.0,
                cx: 320.0,
                cy: 96.0,
            },
            camera_height: 1.65,
            pitch_deg: 0.0,
            wall_distance: None,
            ceiling_height: None,
            ground: true,
            boxes: Vec::new(),
            noise: NoiseSpec::default(),
            seed: 0,
        }
    }

    /// [`kitti_like`](Self::kitti_like) geometry at another resolution.
    pub fn kitti_like_at(width: usize, height: usize) -> Self {
        let mut spec = Self::kitti_like();
        spec.width = width;
        spec.height = height;
        spec.intrinsics = CameraIntrinsics {
            fx: 0.58 * width as f64,
            fy: 1.92 * height as f64,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
        };
        spec
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidParameter {
                name: "image size",
                value: 0.0,
            });
        }
        self.intrinsics.validate_for(self.width, self.height)?;
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GeometryError::InvalidParameter { name, value: v })
            }
        };
        positive("camera_height", self.camera_height)?;
        if !(self.pitch_deg.abs() < 90.0) {
            return Err(GeometryError::InvalidParameter {
                name: "pitch_deg",
                value: self.pitch_deg,
            });
        }
        if let Some(w) = self.wall_distance {
            positive("wall_distance", w)?;
        }
        if let Some(c) = self.ceiling_height {
            positive("ceiling_height", c)?;
        }
        for b in &self.boxes {
            for s in b.size {
                positive("box size", s)?;
            }
        }
        let n = self.noise;
        if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
            return Err(GeometryError::InvalidParameter {
                name: "noise sigma",
                value: n.sigma,
            });
        }
        if !(0.0..=1.0).contains(&n.outlier_fraction) {
            return Err(GeometryError::InvalidParameter {
                name: "outlier_fraction",
                value: n.outlier_fraction,
            });
        }
        if n.outlier_fraction > 0.0 {
            positive("outlier_scale", n.outlier_scale)?;
        }
        Ok(())
    }

    /// Ground normal in camera coordinates.
    pub fn ground_normal(&self) -> Vector3<f64> {
        let p = self.pitch_deg.to_radians();
        Vector3::new(0.0, p.cos(), p.sin())
    }

    /// Rotation taking ground-frame vectors into the camera frame.
    fn camera_from_ground(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::x_axis(), self.pitch_deg.to_radians())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    Sky,
    Ground,
    Wall,
    Ceiling,
    Box,
}

/// A full-width occluding wall standing on the ground `distance` meters
/// ahead; ground is visible only in front of it. Shorter distances leave
/// less ground.
pub fn occluder_scene(base: &SceneSpec, distance: f64) -> SceneSpec {
    let mut spec = base.clone();
    let thickness = 2.0;
    spec.boxes.push(BoxObstacle::on_ground(
        0.0,
        distance + thickness / 2.0,
        4000.0,
        1000.0,
        thickness,
        base.camera_height,
    ));
    spec
}

/// `frames` occluder scenes with distances log-spaced over `[near, far]`.
pub fn occluder_sweep(base: &SceneSpec, frames: usize, near: f64, far: f64) -> Vec<SceneSpec> {
    (0..frames)
        .map(|i| {
            let t = if frames > 1 { i as f64 / (frames - 1) as f64 } else { 0.0 };
            let mut spec = occluder_scene(base, near * (far / near).powf(t));
            spec.seed = base.seed.wrapping_add(i as u64);
            spec
        })
        .collect()
}

/// Rendered scene with its analytic truth.
#[derive(Debug, Clone)]
pub struct Scene {
    pub depth: DepthMap,
    pub labels: Grid<Surface>,
    pub normals: NormalMap,
    pub camera_height: f64,
}

impl Scene {
    pub fn ground_truth(&self) -> GroundMask {
        let mask = self.labels.map(|&l| l == Surface::Ground);
        GroundMask::new(mask, self.depth.valid_count())
    }

    /// Ground pixels whose full 8-neighborhood is ground and inside the image.
    pub fn interior_ground(&self) -> Grid<bool> {
        let (w, h) = self.labels.dims();
        Grid::from_fn(w, h, |r, c| {
            if r == 0 || c == 0 || r + 1 >= h || c + 1 >= w {
                return false;
            }
            (r - 1..=r + 1).all(|rr| (c - 1..=c + 1).all(|cc| *self.labels.get(rr, cc) == Surface::Ground))
        })
    }
}

fn orient(n: Vector3<f64>) -> Vector3<f64> {
    if n.y < 0.0 {
        -n
    } else {
        n
    }
}

/// Ray-casts every pixel against the scene surfaces; depth is the z of the
/// nearest hit. Rays hitting nothing are invalid.
pub fn gen_scene(spec: &SceneSpec) -> Result<Scene, GeometryError> {
    spec.validate()?;
    let k = &spec.intrinsics;
    let rot = spec.camera_from_ground();
    let ground_from_camera = rot.inverse();
    let ground_normal = spec.ground_normal();
    let (w, h) = (spec.width, spec.height);

    let mut depth = Vec::with_capacity(w * h);
    let mut labels = Vec::with_capacity(w * h);
    let mut normals = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            // z component is 1, so the ray parameter is the depth
            let ray_c = k.ray(row as f64, col as f64);
            let ray_g = ground_from_camera * ray_c;
            let mut best: Option<(f64, Surface, Vector3<f64>)> = None;
            let mut consider = |t: f64, s: Surface, n: Vector3<f64>| {
                if t > 0.0 && t.is_finite() && best.is_none_or(|(bt, _, _)| t < bt) {
                    best = Some((t, s, n));
                }
            };
            if spec.ground && ray_g.y > 0.0 {
                consider(spec.camera_height / ray_g.y, Surface::Ground, ground_normal);
            }
            if let Some(c) = spec.ceiling_height {
                if ray_g.y < 0.0 {
                    consider(-c / ray_g.y, Surface::Ceiling, ground_normal);
                }
            }
            if let Some(wall) = spec.wall_distance {
                consider(wall, Surface::Wall, Vector3::z());
            }
            for b in &spec.boxes {
                if let Some((t, n_g)) = b.intersect(&ray_g) {
                    consider(t, Surface::Box, orient(rot * n_g));
                }
            }
            match best {
                Some((t, s, n)) => {
                    depth.push(t);
                    labels.push(s);
                    normals.push(Some(n));
                }
                None => {
                    depth.push(f64::NAN);
                    labels.push(Surface::Sky);
                    normals.push(None);
                }
            }
        }
    }
    Ok(Scene {
        depth: DepthMap::from_raw(w, h, depth, DepthKind::Absolute),
        labels: Grid::from_vec(w, h, labels),
        normals: NormalMap::from_grid(Grid::from_vec(w, h, normals)),
        camera_height: spec.camera_height,
    })
}

/// Applies multiplicative Gaussian noise to every valid pixel, then
/// multiplies exactly `⌊outlier_fraction · N⌋` randomly chosen valid pixels
/// by `outlier_scale`.
pub fn degrade(depth: &DepthMap, noise: &NoiseSpec, seed: u64) -> DepthMap {
    degrade_region(depth, noise, seed, None)
}

/// [`degrade`] restricted to pixels where `region` is true.
pub fn degrade_region(
    depth: &DepthMap,
    noise: &NoiseSpec,
    seed: u64,
    region: Option<&Grid<bool>>,
) -> DepthMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw: Vec<Option<f64>> = depth.grid().iter().copied().collect();
    let eligible: Vec<usize> = raw
        .iter()
        .enumerate()
        .filter(|(idx, v)| v.is_some() && region.is_none_or(|m| m.as_slice()[*idx]))
        .map(|(idx, _)| idx)
        .collect();

    if noise.sigma > 0.0 {
        for &idx in &eligible {
            let z: f64 = StandardNormal.sample(&mut rng);
            if let Some(d) = raw[idx].as_mut() {
                *d = (*d * (1.0 + noise.sigma * z)).max(MIN_VALID_DEPTH);
            }
        }
    }
    let n_outliers = (noise.outlier_fraction * eligible.len() as f64).floor() as usize;
    if n_outliers > 0 {
        for pick in index::sample(&mut rng, eligible.len(), n_outliers.min(eligible.len())) {
            if let Some(d) = raw[eligible[pick]].as_mut() {
                *d = (*d * noise.outlier_scale).max(MIN_VALID_DEPTH);
            }
        }
    }
    DepthMap::from_grid(
        Grid::from_vec(depth.width(), depth.height(), raw),
        depth.kind(),
    )
}

/// Divides by `gamma` and tags the result as relative depth.
pub fn relativize(depth: &DepthMap, gamma: f64) -> Result<DepthMap, GeometryError> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(GeometryError::InvalidParameter {
            name: "gamma",
            value: gamma,
        });
    }
    Ok(depth.map_valid(|_, _, d| d / gamma).with_kind(DepthKind::Relative))
}

/// Single-channel texture `offset + gx·col + gy·row`, clamped to `[0, 1]`.
pub fn gradient_image(width: usize, height: usize, offset: f64, gx: f64, gy: f64) -> Image {
    let data = (0..height)
        .flat_map(|r| (0..width).map(move |c| (offset + gx * c as f64 + gy * r as f64).clamp(0.0, 1.0)))
        .collect();
    Image::new(width, height, 1, data).expect("gradient values are in range")
}

/// Single-channel checkerboard with `cell`-pixel squares.
pub fn checkerboard(width: usize, height: usize, cell: usize, low: f64, high: f64) -> Image {
    let cell = cell.max(1);
    let data = (0..height)
        .flat_map(|r| {
            (0..width).map(move |c| if (r / cell + c / cell).is_multiple_of(2) { low } else { high })
        })
        .collect();
    Image::new(width, height, 1, data).expect("checkerboard values are in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::backproject;

    #[test]
    fn level_ground_backprojects_to_camera_height() {
        let spec = SceneSpec::kitti_like();
        let scene = gen_scene(&spec).unwrap();
        let points = backproject(&scene.depth, &spec.intrinsics).unwrap();
        let mut n = 0;
        for (r, c, &label) in scene.labels.indexed() {
            if label == Surface::Ground {
                let p = points.get(r, c).unwrap();
                assert!((p.y - 1.65).abs() < 1e-9, "row {r}: y = {}", p.y);
                n += 1;
            }
        }
        assert!(n > 0);
        // rows at or above the horizon see nothing
        assert!(scene.depth.get(spec.intrinsics.cy as usize, 10).is_none());
    }

    #[test]
    fn wall_depth_is_exact() {
        let mut spec = SceneSpec::kitti_like();
        spec.wall_distance = Some(23.5);
        let scene = gen_scene(&spec).unwrap();
        let mut walls = 0;
        for (r, c, &label) in scene.labels.indexed() {
            if label == Surface::Wall {
                assert_eq!(scene.depth.get(r, c), Some(23.5));
                walls += 1;
            }
        }
        assert!(walls > 0);
        assert_eq!(scene.depth.valid_count(), spec.width * spec.height);
    }

    #[test]
    fn box_footprint_reduces_ground_ratio() {
        let mut spec = SceneSpec::kitti_like();
        spec.wall_distance = Some(40.0);
        let mut last = f64::INFINITY;
        for width in [0.0, 1.0, 2.0, 4.0, 8.0, 16.0] {
            spec.boxes = if width > 0.0 {
                vec![BoxObstacle::on_ground(0.0, 12.0, width, 2.0, 2.0, 1.65)]
            } else {
                vec![]
            };
            let ratio = gen_scene(&spec).unwrap().ground_truth().ground_ratio();
            assert!(ratio < last || width == 0.0, "width {width}: {ratio} !< {last}");
            last = ratio;
        }
    }

    #[test]
    fn determinism() {
        let mut spec = SceneSpec::kitti_like();
        spec.boxes.push(BoxObstacle::on_ground(1.0, 10.0, 2.0, 1.5, 4.0, 1.65));
        let a = gen_scene(&spec).unwrap();
        let b = gen_scene(&spec).unwrap();
        assert_eq!(a.depth, b.depth);
        let noise = NoiseSpec { sigma: 0.02, outlier_fraction: 0.05, outlier_scale: 3.0 };
        assert_eq!(degrade(&a.depth, &noise, 9), degrade(&b.depth, &noise, 9));
        assert_ne!(degrade(&a.depth, &noise, 9), degrade(&a.depth, &noise, 10));
    }

    #[test]
    fn degrade_noop_and_outlier_count() {
        let depth = DepthMap::from_fn(50, 40, DepthKind::Absolute, |r, c| Some(1.0 + (r * 50 + c) as f64));
        assert_eq!(degrade(&depth, &NoiseSpec::default(), 3), depth);
        let noise = NoiseSpec { sigma: 0.0, outlier_fraction: 0.1, outlier_scale: 5.0 };
        let out = degrade(&depth, &noise, 3);
        let altered = depth
            .grid()
            .iter()
            .zip(out.grid().iter())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(altered, 200);
    }

    #[test]
    fn degrade_noise_statistics() {
        let depth = DepthMap::from_fn(400, 250, DepthKind::Absolute, |_, _| Some(10.0));
        let noise = NoiseSpec { sigma: 0.01, ..Default::default() };
        let out = degrade(&depth, &noise, 42);
        let ratios: Vec<f64> = out.grid().iter().map(|v| v.unwrap() / 10.0 - 1.0).collect();
        let n = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / n;
        let std = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std - 0.01).abs() < 0.001, "std {std}");
    }

    #[test]
    fn relativize_round_trip() {
        let depth = DepthMap::from_fn(4, 3, DepthKind::Absolute, |r, c| Some(2.0 + r as f64 + 0.5 * c as f64));
        let same = relativize(&depth, 1.0).unwrap();
        assert_eq!(same.kind(), DepthKind::Relative);
        assert_eq!(same.to_raw(), depth.to_raw());
        let rel = relativize(&depth, 0.1).unwrap();
        let back = crate::geometry::recover_absolute(&rel, 0.1).unwrap();
        for (a, b) in back.to_raw().iter().zip(depth.to_raw()) {
            assert!((a - b).abs() <= 1e-9 * b);
        }
        assert!(relativize(&depth, 0.0).is_err());
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut spec = SceneSpec::kitti_like();
        spec.camera_height = -1.0;
        assert!(gen_scene(&spec).is_err());
        let mut spec = SceneSpec::kitti_like();
        spec.pitch_deg = 90.0;
        assert!(gen_scene(&spec).is_err());
    }
}
