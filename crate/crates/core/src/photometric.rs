//! Self-supervision losses for monocular depth training, as plain image
//! operations: SSIM photometric error, per-pixel minimum reprojection,
//! edge-aware smoothness, the multi-scale weighted total, and depth-based
//! inverse warping.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::depth::DepthMap;
use crate::error::PhotometricError;
use crate::grid::Grid;

/// SSIM stabilizers for intensities in `[0, 1]`.
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Sub-pixel sample positions this close to the pixel grid are snapped onto it.
const SNAP_EPS: f64 = 1e-9;

/// Interleaved `height × width × channels` intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, PhotometricError> {
        if channels != 1 && channels != 3 {
            return Err(PhotometricError::InvalidImage(format!(
                "{channels} channels, expected 1 or 3"
            )));
        }
        if data.len() != width * height * channels {
            return Err(PhotometricError::InvalidImage(format!(
                "{} values for {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(PhotometricError::InvalidImage(format!(
                "intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self, PhotometricError> {
        let mut data = Vec::with_capacity(width * height * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(width, height, channels)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Bilinear sample at fractional `(row, col)`, clamped to the image.
    fn bilinear(&self, row: f64, col: f64, ch: usize) -> f64 {
        let col = col.clamp(0.0, (self.width - 1) as f64);
        let row = row.clamp(0.0, (self.height - 1) as f64);
        let c0 = col.floor() as usize;
        let r0 = row.floor() as usize;
        let c1 = (c0 + 1).min(self.width - 1);
        let r1 = (r0 + 1).min(self.height - 1);
        let ax = col - c0 as f64;
        let ay = row - r0 as f64;
        let top = self.get(r0, c0, ch) * (1.0 - ax) + self.get(r0, c1, ch) * ax;
        let bottom = self.get(r1, c0, ch) * (1.0 - ax) + self.get(r1, c1, ch) * ax;
        top * (1.0 - ay) + bottom * ay
    }
}

/// Rigid transform taking target-frame points into the source frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, PhotometricError> {
        let orthogonality = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !(orthogonality <= 1e-9 && (rotation.determinant() - 1.0).abs() <= 1e-9) {
            return Err(PhotometricError::InvalidRotation);
        }
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(PhotometricError::InvalidRotation);
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }
}

/// Loss hyper-parameters. `v` and `w` hold one weight per scale, coarsest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl Default for LossWeights {
    fn default() -> Self {
        let per_scale = vec![1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0, 1.0];
        Self {
            mu: 1.0,
            lambda: 0.001,
            alpha: 0.85,
            v: per_scale.clone(),
            w: per_scale,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), PhotometricError> {
        check_alpha(self.alpha)?;
        if self.v.len() != self.w.len() {
            return Err(PhotometricError::ScaleCountMismatch {
                expected: self.v.len(),
                got: self.w.len(),
            });
        }
        for (name, weights) in [("v", &self.v), ("w", &self.w)] {
            if let Some(&bad) = weights.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
                return Err(PhotometricError::InvalidWeight { name, value: bad });
            }
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<(), PhotometricError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PhotometricError::InvalidWeight {
            name: "alpha",
            value: alpha,
        });
    }
    Ok(())
}

fn check_shape(a: &Image, b: &Image) -> Result<(), PhotometricError> {
    if a.shape() != b.shape() {
        return Err(PhotometricError::DimensionMismatch {
            expected: a.shape(),
            got: b.shape(),
        });
    }
    Ok(())
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    if i < 0 {
        (-i) as usize
    } else if i >= n {
        (2 * n - 2 - i) as usize
    } else {
        i as usize
    }
}

/// Local SSIM over a 3×3 uniform window with reflection padding, clamped to
/// `[0, 1]` and averaged over channels.
pub fn ssim_map(a: &Image, b: &Image) -> Result<Grid<f64>, PhotometricError> {
    check_shape(a, b)?;
    let (w, h, ch) = a.shape();
    let mut out = Grid::filled(w, h, 0.0);
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for k in 0..ch {
                let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dr in -1..=1isize {
                    let rr = reflect(r as isize + dr, h);
                    for dc in -1..=1isize {
                        let cc = reflect(c as isize + dc, w);
                        let x = a.get(rr, cc, k);
                        let y = b.get(rr, cc, k);
                        sa += x;
                        sb += y;
                        saa += x * x;
                        sbb += y * y;
                        sab += x * y;
                    }
                }
                let mu_a = sa / 9.0;
                let mu_b = sb / 9.0;
                let var_a = saa / 9.0 - mu_a * mu_a;
                let var_b = sbb / 9.0 - mu_b * mu_b;
                let cov = sab / 9.0 - mu_a * mu_b;
                let num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2);
                let den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2);
                acc += (num / den).clamp(0.0, 1.0);
            }
            *out.get_mut(r, c) = acc / ch as f64;
        }
    }
    Ok(out)
}

/// `alpha · (1 − SSIM) / 2 + (1 − alpha) · |a − b|`, L1 averaged over channels.
pub fn photometric_error(a: &Image, b: &Image, alpha: f64) -> Result<Grid<f64>, PhotometricError> {
    check_alpha(alpha)?;
    let ssim = ssim_map(a, b)?;
    let ch = a.channels();
    Ok(Grid::from_fn(a.width(), a.height(), |r, c| {
        let l1 = (0..ch)
            .map(|k| (a.get(r, c, k) - b.get(r, c, k)).abs())
            .sum::<f64>()
            / ch as f64;
        alpha * (1.0 - ssim.get(r, c)) / 2.0 + (1.0 - alpha) * l1
    }))
}

/// Warped image plus the pixels that had a valid source sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Warped {
    pub image: Image,
    pub valid: Grid<bool>,
}

impl Warped {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

#[inline]
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP_EPS {
        r
    } else {
        x
    }
}

/// Reconstructs the target view by sampling `source` where each target
/// pixel lands after backprojection with `target_depth`, transformation by
/// `pose`, and projection through `k`.
///
/// Pixels that land outside the source, behind the camera, or have no depth
/// are invalid; outside landings take the edge-clamped source value, the
/// others the source value at the same pixel.
pub fn inverse_warp(
    source: &Image,
    target_depth: &DepthMap,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> Result<Warped, PhotometricError> {
    let (w, h, ch) = source.shape();
    if target_depth.dims() != (w, h) {
        return Err(PhotometricError::DimensionMismatch {
            expected: (w, h, ch),
            got: (target_depth.width(), target_depth.height(), ch),
        });
    }
    let mut data = Vec::with_capacity(w * h * ch);
    let mut valid = Vec::with_capacity(w * h);
    let (max_c, max_r) = ((w - 1) as f64, (h - 1) as f64);
    for r in 0..h {
        for c in 0..w {
            let landing = target_depth.get(r, c).and_then(|d| {
                let p = pose.transform(&k.backproject_pixel(r as f64, c as f64, d));
                k.project(&p).map(|(sr, sc)| (snap(sr), snap(sc)))
            });
            let (sr, sc, ok) = match landing {
                Some((sr, sc)) => {
                    let inside = (0.0..=max_r).contains(&sr) && (0.0..=max_c).contains(&sc);
                    (sr, sc, inside)
                }
                None => (r as f64, c as f64, false),
            };
            for k in 0..ch {
                data.push(source.bilinear(sr, sc, k));
            }
            valid.push(ok);
        }
    }
    Ok(Warped {
        image: Image::new(w, h, ch, data)?,
        valid: Grid::from_vec(w, h, valid),
    })
}

/// Pointwise minimum over photometric-error maps.
pub fn per_pixel_min_loss(candidates: &[Grid<f64>]) -> Result<Grid<f64>, PhotometricError> {
    let first = candidates.first().ok_or(PhotometricError::NoCandidates)?;
    let (w, h) = first.dims();
    if let Some(bad) = candidates.iter().find(|m| m.dims() != (w, h)) {
        return Err(PhotometricError::DimensionMismatch {
            expected: (w, h, 1),
            got: (bad.width(), bad.height(), 1),
        });
    }
    Ok(Grid::from_fn(w, h, |r, c| {
        candidates
            .iter()
            .map(|m| *m.get(r, c))
            .fold(f64::INFINITY, f64::min)
    }))
}

/// Photometric error of every candidate view against `target`, reduced by
/// [`per_pixel_min_loss`].
pub fn min_reprojection_loss(
    target: &Image,
    candidates: &[&Image],
    alpha: f64,
) -> Result<Grid<f64>, PhotometricError> {
    let maps = candidates
        .iter()
        .map(|img| photometric_error(img, target, alpha))
        .collect::<Result<Vec<_>, _>>()?;
    per_pixel_min_loss(&maps)
}

/// Edge-aware smoothness of mean-normalized inverse depth.
///
/// Forward differences along x and y, each weighted by `exp(−|∂I|)` with the
/// image gradient averaged over channels; returns the sum of the two mean
/// terms.
pub fn smoothness_loss(depth: &DepthMap, image: &Image) -> Result<f64, PhotometricError> {
    let (w, h, ch) = image.shape();
    if depth.dims() != (w, h) {
        return Err(PhotometricError::DimensionMismatch {
            expected: (w, h, ch),
            got: (depth.width(), depth.height(), ch),
        });
    }
    let inv = depth
        .grid()
        .iter()
        .map(|d| d.map(|d| 1.0 / d).ok_or(PhotometricError::NonPositiveDepth))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = inv.iter().sum::<f64>() / inv.len() as f64;
    let disp = Grid::from_vec(w, h, inv.into_iter().map(|d| d / mean).collect());

    let grad = |r0: usize, c0: usize, r1: usize, c1: usize| {
        let di = (0..ch)
            .map(|k| (image.get(r1, c1, k) - image.get(r0, c0, k)).abs())
            .sum::<f64>()
            / ch as f64;
        (disp.get(r1, c1) - disp.get(r0, c0)).abs() * (-di).exp()
    };
    let mut term_x = 0.0;
    let mut term_y = 0.0;
    for r in 0..h {
        for c in 0..w {
            if c + 1 < w {
                term_x += grad(r, c, r, c + 1);
            }
            if r + 1 < h {
                term_y += grad(r, c, r + 1, c);
            }
        }
    }
    let nx = (w.saturating_sub(1) * h) as f64;
    let ny = (w * h.saturating_sub(1)) as f64;
    let mean_x = if nx > 0.0 { term_x / nx } else { 0.0 };
    let mean_y = if ny > 0.0 { term_y / ny } else { 0.0 };
    Ok(mean_x + mean_y)
}

/// `Σᵢ (μ vᵢ Lpᵢ + λ wᵢ Lsᵢ)` over scales.
pub fn overall_loss(
    reprojection: &[f64],
    smoothness: &[f64],
    weights: &LossWeights,
) -> Result<f64, PhotometricError> {
    weights.validate()?;
    let n = weights.v.len();
    for got in [reprojection.len(), smoothness.len()] {
        if got != n {
            return Err(PhotometricError::ScaleCountMismatch { expected: n, got });
        }
    }
    Ok(reprojection
        .iter()
        .zip(smoothness)
        .zip(weights.v.iter().zip(&weights.w))
        .map(|((lp, ls), (v, w))| weights.mu * v * lp + weights.lambda * w * ls)
        .sum())
}
