use dgc_core::geometry::{
    backproject, camera_heights, compute_normal_map, detect_ground, dgc_pipeline,
    estimate_camera_height, DgcConfig, GroundMask,
};
use dgc_core::stats::median;
use dgc_core::synthetic::{degrade, degrade_region, gen_scene, relativize, NoiseSpec, SceneSpec};
use dgc_core::{CameraIntrinsics, DepthKind, DepthMap, GeometryError};
use proptest::prelude::*;

fn angle_deg(a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

fn pitched(pitch: f64) -> SceneSpec {
    let mut s = SceneSpec::kitti_like();
    s.pitch_deg = pitch;
    s
}

fn small(pitch: f64) -> SceneSpec {
    let mut s = SceneSpec::kitti_like_at(160, 48);
    s.pitch_deg = pitch;
    s
}

#[test]
fn flat_ground_normals_match_truth() {
    for pitch in [0.0, -3.0, 4.0] {
        let spec = pitched(pitch);
        let scene = gen_scene(&spec).unwrap();
        let points = backproject(&scene.depth, &spec.intrinsics).unwrap();
        let normals = compute_normal_map(&points);
        let truth = spec.ground_normal();
        let interior = scene.interior_ground();
        let mut checked = 0;
        for (r, c, inside) in interior.indexed() {
            if !inside {
                continue;
            }
            let n = normals.get(r, c).expect("interior ground normal is valid");
            assert!(angle_deg(&n, &truth) < 0.1, "pitch {pitch} at ({r},{c})");
            checked += 1;
        }
        assert!(checked > 10_000);
    }
}

#[test]
fn mask_covers_ground_and_no_wall() {
    let mut spec = SceneSpec::kitti_like();
    spec.wall_distance = Some(30.0);
    let scene = gen_scene(&spec).unwrap();
    let out = dgc_pipeline(
        &scene.depth.clone().with_kind(DepthKind::Relative),
        &spec.intrinsics,
        spec.camera_height,
        &DgcConfig::default(),
    )
    .unwrap();
    let truth = scene.ground_truth();
    for (r, c, inside) in scene.interior_ground().indexed() {
        if *inside {
            assert!(out.mask.get(r, c), "missed interior ground at ({r},{c})");
        }
    }
    assert!(out.mask.is_subset_of(&truth));
}

#[test]
fn tilted_plane_heights_are_exact() {
    for pitch in [-4.0, -2.0, 2.0, 4.0] {
        let spec = pitched(pitch);
        let scene = gen_scene(&spec).unwrap();
        let points = backproject(&scene.depth, &spec.intrinsics).unwrap();
        let normals = compute_normal_map(&points);
        let mask = detect_ground(&normals, &points, 5.0).unwrap();
        let samples = camera_heights(&points, &normals, &mask).unwrap();
        assert!(samples.len() > 10_000);
        for s in &samples.samples {
            assert!((s.height - spec.camera_height).abs() < 1e-6, "pitch {pitch}: {}", s.height);
        }
    }
}

#[test]
fn relativized_scenes_recover_gamma() {
    let spec = SceneSpec::kitti_like();
    let scene = gen_scene(&spec).unwrap();
    for gamma in [0.1, 1.0, 7.3] {
        let rel = relativize(&scene.depth, gamma).unwrap();
        let out = dgc_pipeline(&rel, &spec.intrinsics, spec.camera_height, &DgcConfig::default()).unwrap();
        assert!((out.estimate.scale_factor - gamma).abs() / gamma < 1e-6);
        for (a, b) in out.absolute.grid().iter().zip(scene.depth.grid().iter()) {
            assert_eq!(a.is_some(), b.is_some());
            if let (Some(a), Some(b)) = (a, b) {
                assert!((a - b).abs() / b < 1e-9);
            }
        }
    }
}

#[test]
fn small_iid_noise_keeps_scale_within_two_percent() {
    let spec = small(0.0);
    let scene = gen_scene(&spec).unwrap();
    let noise = NoiseSpec { sigma: 0.01, ..NoiseSpec::default() };
    for seed in 0..100 {
        let noisy = degrade(&scene.depth, &noise, seed).with_kind(DepthKind::Relative);
        let out = dgc_pipeline(&noisy, &spec.intrinsics, spec.camera_height, &DgcConfig::default()).unwrap();
        let err = (out.estimate.scale_factor - 1.0).abs();
        assert!(err < 0.02, "seed {seed}: {err}");
    }
}

#[test]
fn median_shrugs_off_ground_outliers() {
    let spec = small(0.0);
    let scene = gen_scene(&spec).unwrap();
    let noise = NoiseSpec { sigma: 0.0, outlier_fraction: 0.2, outlier_scale: 5.0 };
    let ground = scene.ground_truth();
    for seed in 0..20 {
        let bad = degrade_region(&scene.depth, &noise, seed, Some(ground.grid())).with_kind(DepthKind::Relative);
        let out = dgc_pipeline(&bad, &spec.intrinsics, spec.camera_height, &DgcConfig::default()).unwrap();
        assert!((out.estimate.scale_factor - 1.0).abs() < 0.02);
    }
}

#[test]
fn wall_only_scene_has_no_ground() {
    let mut spec = small(0.0);
    spec.ground = false;
    spec.wall_distance = Some(10.0);
    let scene = gen_scene(&spec).unwrap();
    let err = dgc_pipeline(
        &scene.depth.clone().with_kind(DepthKind::Relative),
        &spec.intrinsics,
        spec.camera_height,
        &DgcConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, GeometryError::NoGround { found: 0, .. }));
}

#[test]
fn estimate_rejects_too_few_samples() {
    let spec = small(0.0);
    let scene = gen_scene(&spec).unwrap();
    let points = backproject(&scene.depth, &spec.intrinsics).unwrap();
    let normals = compute_normal_map(&points);
    let mask = detect_ground(&normals, &points, 5.0).unwrap();
    let samples = camera_heights(&points, &normals, &mask).unwrap();
    assert!(estimate_camera_height(&samples, samples.len() + 1).is_err());
    let h = estimate_camera_height(&samples, 1).unwrap();
    assert!((h - median(&samples.heights()).unwrap()).abs() < 1e-15);
}

fn mask_for(depth: &DepthMap, k: &CameraIntrinsics, s_max: f64) -> GroundMask {
    let points = backproject(depth, k).unwrap();
    detect_ground(&compute_normal_map(&points), &points, s_max).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scaling_depth_scales_height_only(c in prop_oneof![Just(0.01), Just(1.0), Just(100.0), 0.01f64..100.0],
                                        pitch in -4.0f64..4.0, seed in 0u64..1000) {
        let mut spec = small(pitch);
        spec.wall_distance = Some(25.0);
        let scene = gen_scene(&spec).unwrap();
        let noise = NoiseSpec { sigma: 0.01, ..NoiseSpec::default() };
        let base = degrade(&scene.depth, &noise, seed).with_kind(DepthKind::Relative);
        let cfg = DgcConfig::default();
        let a = dgc_pipeline(&base, &spec.intrinsics, 1.65, &cfg).unwrap();
        let b = dgc_pipeline(&base.scaled(c, DepthKind::Relative), &spec.intrinsics, 1.65, &cfg).unwrap();
        prop_assert_eq!(a.mask.grid(), b.mask.grid());
        prop_assert!((b.estimate.estimated_height / (c * a.estimate.estimated_height) - 1.0).abs() < 1e-9);
        prop_assert!((b.estimate.scale_factor * c / a.estimate.scale_factor - 1.0).abs() < 1e-9);
        for (x, y) in a.absolute.grid().iter().zip(b.absolute.grid().iter()) {
            if let (Some(x), Some(y)) = (x, y) {
                prop_assert!((x - y).abs() / x < 1e-9);
            }
        }
    }

    #[test]
    fn mask_grows_with_threshold(lo in 0.5f64..20.0, extra in 0.0f64..40.0, seed in 0u64..1000) {
        let spec = small(2.0);
        let scene = gen_scene(&spec).unwrap();
        let noise = NoiseSpec { sigma: 0.02, ..NoiseSpec::default() };
        let depth = degrade(&scene.depth, &noise, seed);
        let narrow = mask_for(&depth, &spec.intrinsics, lo);
        let wide = mask_for(&depth, &spec.intrinsics, lo + extra);
        prop_assert!(narrow.is_subset_of(&wide));
    }

    #[test]
    fn backproject_then_project_is_identity(r in 0usize..48, c in 0usize..160, d in 0.1f64..100.0) {
        let k = small(0.0).intrinsics;
        let depth = DepthMap::from_fn(160, 48, DepthKind::Relative, |_, _| Some(d));
        let p = backproject(&depth, &k).unwrap().get(r, c).unwrap();
        let (pr, pc) = k.project(&p).unwrap();
        prop_assert!((pr - r as f64).abs() < 1e-9 && (pc - c as f64).abs() < 1e-9);
        prop_assert!((p.z - d).abs() < 1e-12);
    }
}
