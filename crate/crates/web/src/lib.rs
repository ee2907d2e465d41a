//! WebAssembly bindings for the browser demo: render a synthetic road
//! scene, then inspect its normals, ground mask and recovered scale.

use dgc_core::geometry::{backproject, compute_normal_map, detect_ground, dgc_pipeline, DgcConfig};
use dgc_core::synthetic::{degrade, gen_scene, occluder_scene, relativize, BoxObstacle, NoiseSpec, SceneSpec};
use dgc_core::{CameraIntrinsics, DepthMap, GeometryError, NormalMap, PointGrid};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Scene controls exposed on the page.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    pub pitch_deg: f64,
    /// Full-width occluder distance; `<= 0` for none.
    pub occluder_distance: f64,
    /// A car-sized box this far ahead; `<= 0` for none.
    pub box_distance: f64,
    pub noise_sigma: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 320,
            height: 96,
            pitch_deg: 0.0,
            occluder_distance: 0.0,
            box_distance: 12.0,
            noise_sigma: 0.0,
            gamma: 4.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recovery {
    pub scale_factor: f64,
    pub true_scale: f64,
    pub scale_error: f64,
    pub estimated_height: f64,
    pub ground_ratio: f64,
    pub n_samples: usize,
    pub low_confidence: bool,
}

/// Relative depth of one synthetic frame plus the geometry derived from it.
pub struct DemoScene {
    params: SceneParams,
    camera_height: f64,
    intrinsics: CameraIntrinsics,
    relative: DepthMap,
    points: PointGrid,
    normals: NormalMap,
}

impl DemoScene {
    pub fn build(params: SceneParams) -> Result<Self, GeometryError> {
        let mut spec = SceneSpec::kitti_like_at(params.width, params.height);
        spec.pitch_deg = params.pitch_deg;
        spec.seed = params.seed;
        spec.wall_distance = Some(60.0);
        if params.occluder_distance > 0.0 {
            spec = occluder_scene(&spec, params.occluder_distance);
        }
        if params.box_distance > 0.0 {
            spec.boxes.push(BoxObstacle::on_ground(1.5, params.box_distance + 2.0, 1.8, 1.5, 4.0, spec.camera_height));
        }
        let scene = gen_scene(&spec)?;
        let noise = NoiseSpec { sigma: params.noise_sigma.max(0.0), ..NoiseSpec::default() };
        let relative = relativize(&degrade(&scene.depth, &noise, params.seed), params.gamma)?;
        let points = backproject(&relative, &spec.intrinsics)?;
        let normals = compute_normal_map(&points);
        Ok(Self {
            params,
            camera_height: spec.camera_height,
            intrinsics: spec.intrinsics,
            relative,
            points,
            normals,
        })
    }

    /// Normals as RGBA, `[-1, 1] → [0, 255]`; invalid pixels transparent black.
    pub fn normals_rgba(&self) -> Vec<u8> {
        self.normals
            .grid()
            .iter()
            .flat_map(|n| match n {
                Some(n) => {
                    let c = |v: f64| (((v + 1.0) / 2.0) * 255.0).round() as u8;
                    [c(n.x), c(n.y), c(n.z), 255]
                }
                None => [0, 0, 0, 0],
            })
            .collect()
    }

    /// Ground pixels green over a grey depth shading; sky transparent.
    pub fn ground_mask_rgba(&self, s_max_deg: f64) -> Result<Vec<u8>, GeometryError> {
        let mask = detect_ground(&self.normals, &self.points, s_max_deg)?;
        let far = self.relative.grid().iter().flatten().fold(0.0f64, |m, &d| m.max(d));
        Ok(self
            .relative
            .grid()
            .indexed()
            .flat_map(|(r, c, d)| match d {
                None => [0, 0, 0, 0],
                Some(_) if mask.get(r, c) => [40, 200, 90, 255],
                Some(d) => {
                    let shade = (220.0 * (1.0 - (d / far).sqrt())) as u8 + 20;
                    [shade, shade, shade, 255]
                }
            })
            .collect())
    }

    pub fn recover(&self, s_max_deg: f64) -> Result<Recovery, GeometryError> {
        let cfg = DgcConfig::default().with_s_max(s_max_deg);
        let out = dgc_pipeline(&self.relative, &self.intrinsics, self.camera_height, &cfg)?;
        let e = out.estimate;
        Ok(Recovery {
            scale_factor: e.scale_factor,
            true_scale: self.params.gamma,
            scale_error: e.scale_factor / self.params.gamma - 1.0,
            estimated_height: e.estimated_height,
            ground_ratio: e.ground_ratio,
            n_samples: e.n_samples,
            low_confidence: e.low_confidence,
        })
    }
}

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Handle the page keeps between slider moves.
#[wasm_bindgen]
pub struct Demo {
    inner: DemoScene,
}

#[wasm_bindgen]
impl Demo {
    #[allow(clippy::too_many_arguments)]
    #[wasm_bindgen(constructor)]
    pub fn new(
        width: usize,
        height: usize,
        pitch_deg: f64,
        occluder_distance: f64,
        box_distance: f64,
        noise_sigma: f64,
        gamma: f64,
        seed: u32,
    ) -> Result<Demo, JsValue> {
        let params = SceneParams {
            width,
            height,
            pitch_deg,
            occluder_distance,
            box_distance,
            noise_sigma,
            gamma,
            seed: seed as u64,
        };
        DemoScene::build(params).map(|inner| Demo { inner }).map_err(js_err)
    }

    pub fn width(&self) -> usize {
        self.inner.params.width
    }

    pub fn height(&self) -> usize {
        self.inner.params.height
    }

    #[wasm_bindgen(js_name = normalsRgba)]
    pub fn normals_rgba(&self) -> Vec<u8> {
        self.inner.normals_rgba()
    }

    #[wasm_bindgen(js_name = groundMaskRgba)]
    pub fn ground_mask_rgba(&self, s_max_deg: f64) -> Result<Vec<u8>, JsValue> {
        self.inner.ground_mask_rgba(s_max_deg).map_err(js_err)
    }

    /// Scale recovery report as JSON; no-ground is reported, not thrown.
    pub fn recover(&self, s_max_deg: f64) -> String {
        match self.inner.recover(s_max_deg) {
            Ok(r) => serde_json::to_string(&r).unwrap_or_default(),
            Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
        }
    }
}
