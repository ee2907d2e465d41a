//! Plain-text scene description.
//!
//! One `key = value` per line, `#` starts a comment. Missing keys fall back
//! to the 640×192 KITTI-style defaults. Keys:
//!
//! | key | value |
//! |-----|-------|
//! | `width`, `height` | image size, pixels |
//! | `fx`, `fy`, `cx`, `cy` | intrinsics, pixels |
//! | `camera_height` | meters |
//! | `pitch_deg` | camera pitch about x, degrees |
//! | `ground` | `true` / `false` |
//! | `wall_distance` | frontal wall depth, meters |
//! | `ceiling_height` | ceiling distance above the camera, meters |
//! | `box` | `x, y, z, size_x, size_y, size_z` in the ground-aligned frame; repeatable |
//! | `box_on_ground` | `x, z, width, height, depth`; repeatable |
//! | `noise_sigma`, `outlier_fraction`, `outlier_scale` | depth degradation |
//! | `seed` | degradation seed |
//! | `gamma` | also emit relative depth divided by this |

use std::fmt::Write;

use dgc_core::synthetic::{BoxObstacle, NoiseSpec, SceneSpec};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneFile {
    pub spec: SceneSpec,
    pub gamma: Option<f64>,
}

fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("scene key '{key}': '{v}' is not a number")))
}

fn parse_list(key: &str, v: &str, n: usize) -> CliResult<Vec<f64>> {
    let vals = v
        .split(',')
        .map(|x| parse_f64(key, x))
        .collect::<CliResult<Vec<_>>>()?;
    if vals.len() != n {
        return Err(CliError::Validation(format!(
            "scene key '{key}' takes {n} comma-separated numbers, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

pub fn parse_scene(text: &str) -> CliResult<SceneFile> {
    let mut spec = SceneSpec::kitti_like();
    let mut gamma = None;
    let mut intrinsics_set = false;
    let mut size_set = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("scene line {}: expected key = value", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let num = || parse_f64(key, value);
        match key {
            "width" | "height" => {
                let v: usize = value.parse().map_err(|_| {
                    CliError::Validation(format!("scene key '{key}': '{value}' is not a pixel count"))
                })?;
                if key == "width" {
                    spec.width = v;
                } else {
                    spec.height = v;
                }
                size_set = true;
            }
            "fx" => (spec.intrinsics.fx, intrinsics_set) = (num()?, true),
            "fy" => (spec.intrinsics.fy, intrinsics_set) = (num()?, true),
            "cx" => (spec.intrinsics.cx, intrinsics_set) = (num()?, true),
            "cy" => (spec.intrinsics.cy, intrinsics_set) = (num()?, true),
            "camera_height" => spec.camera_height = num()?,
            "pitch_deg" => spec.pitch_deg = num()?,
            "ground" => {
                spec.ground = value.parse().map_err(|_| {
                    CliError::Validation(format!("scene key 'ground': '{value}' is not a boolean"))
                })?
            }
            "wall_distance" => spec.wall_distance = Some(num()?),
            "ceiling_height" => spec.ceiling_height = Some(num()?),
            "box" => {
                let v = parse_list(key, value, 6)?;
                spec.boxes.push(BoxObstacle {
                    center: [v[0], v[1], v[2]],
                    size: [v[3], v[4], v[5]],
                });
            }
            "box_on_ground" => {
                let v = parse_list(key, value, 5)?;
                spec.boxes.push(BoxObstacle::on_ground(
                    v[0],
                    v[1],
                    v[2],
                    v[3],
                    v[4],
                    spec.camera_height,
                ));
            }
            "noise_sigma" => spec.noise.sigma = num()?,
            "outlier_fraction" => spec.noise.outlier_fraction = num()?,
            "outlier_scale" => spec.noise.outlier_scale = num()?,
            "seed" => {
                spec.seed = value.parse().map_err(|_| {
                    CliError::Validation(format!("scene key 'seed': '{value}' is not an integer"))
                })?
            }
            "gamma" => gamma = Some(num()?),
            other => {
                return Err(CliError::Validation(format!(
                    "scene line {}: unknown key '{other}'",
                    lineno + 1
                )))
            }
        }
    }
    if size_set && !intrinsics_set {
        let rescaled = SceneSpec::kitti_like_at(spec.width, spec.height);
        spec.intrinsics = rescaled.intrinsics;
    }
    spec.validate()?;
    if let Some(g) = gamma {
        if !(g.is_finite() && g > 0.0) {
            return Err(CliError::Validation(format!("gamma must be positive, got {g}")));
        }
    }
    Ok(SceneFile { spec, gamma })
}

/// Writes a scene back out; boxes are emitted in the explicit `box` form.
pub fn format_scene(scene: &SceneFile) -> String {
    let s = &scene.spec;
    let k = &s.intrinsics;
    let mut out = String::new();
    let _ = writeln!(out, "width = {}\nheight = {}", s.width, s.height);
    let _ = writeln!(out, "fx = {}\nfy = {}\ncx = {}\ncy = {}", k.fx, k.fy, k.cx, k.cy);
    let _ = writeln!(out, "camera_height = {}\npitch_deg = {}", s.camera_height, s.pitch_deg);
    let _ = writeln!(out, "ground = {}", s.ground);
    if let Some(w) = s.wall_distance {
        let _ = writeln!(out, "wall_distance = {w}");
    }
    if let Some(c) = s.ceiling_height {
        let _ = writeln!(out, "ceiling_height = {c}");
    }
    for b in &s.boxes {
        let [x, y, z] = b.center;
        let [a, bb, c] = b.size;
        let _ = writeln!(out, "box = {x}, {y}, {z}, {a}, {bb}, {c}");
    }
    let NoiseSpec {
        sigma,
        outlier_fraction,
        outlier_scale,
    } = s.noise;
    let _ = writeln!(
        out,
        "noise_sigma = {sigma}\noutlier_fraction = {outlier_fraction}\noutlier_scale = {outlier_scale}"
    );
    let _ = writeln!(out, "seed = {}", s.seed);
    if let Some(g) = scene.gamma {
        let _ = writeln!(out, "gamma = {g}");
    }
    out
}
