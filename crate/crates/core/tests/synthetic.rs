use dgc_core::geometry::backproject;
use dgc_core::synthetic::{degrade, gen_scene, occluder_sweep, relativize, BoxObstacle, NoiseSpec, SceneSpec, Surface};
use dgc_core::{DepthKind, DepthMap};

#[test]
fn ground_points_lie_on_the_plane() {
    let spec = SceneSpec::kitti_like();
    let scene = gen_scene(&spec).unwrap();
    let points = backproject(&scene.depth, &spec.intrinsics).unwrap();
    for (r, c, l) in scene.labels.indexed() {
        if *l == Surface::Ground {
            let y = points.get(r, c).unwrap().y;
            assert!((y - spec.camera_height).abs() < 1e-12);
        }
    }
}

#[test]
fn frontal_wall_depth_is_constant() {
    let mut spec = SceneSpec::kitti_like_at(120, 60);
    spec.wall_distance = Some(17.5);
    let scene = gen_scene(&spec).unwrap();
    for (r, c, l) in scene.labels.indexed() {
        if *l == Surface::Wall {
            assert_eq!(scene.depth.get(r, c), Some(17.5));
        }
    }
}

#[test]
fn ground_ratio_falls_as_boxes_grow() {
    let mut last = f64::INFINITY;
    for width in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let mut spec = SceneSpec::kitti_like_at(160, 48);
        spec.boxes.push(BoxObstacle::on_ground(0.0, 10.0, width, 1.5, 1.0, spec.camera_height));
        let ratio = gen_scene(&spec).unwrap().ground_truth().ground_ratio();
        assert!(ratio < last, "width {width}: {ratio} !< {last}");
        last = ratio;
    }
}

#[test]
fn occluder_sweep_orders_ground_ratio() {
    let base = SceneSpec::kitti_like_at(160, 48);
    let ratios: Vec<f64> = occluder_sweep(&base, 12, 6.0, 200.0)
        .iter()
        .map(|s| gen_scene(s).unwrap().ground_truth().ground_ratio())
        .collect();
    assert!(ratios.windows(2).all(|w| w[0] <= w[1]), "{ratios:?}");
}

#[test]
fn noise_statistics() {
    let depth = DepthMap::from_fn(400, 250, DepthKind::Absolute, |_, _| Some(10.0));
    let noise = NoiseSpec { sigma: 0.01, ..NoiseSpec::default() };
    let out = degrade(&depth, &noise, 42);
    let rel: Vec<f64> = out.grid().iter().map(|d| d.unwrap() / 10.0 - 1.0).collect();
    let n = rel.len() as f64;
    let mean = rel.iter().sum::<f64>() / n;
    let std = (rel.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((std - 0.01).abs() < 0.001, "{std}");
}

#[test]
fn outliers_alter_exact_count() {
    let depth = DepthMap::from_fn(50, 40, DepthKind::Absolute, |r, c| Some(1.0 + (r * 50 + c) as f64));
    let noise = NoiseSpec { sigma: 0.0, outlier_fraction: 0.1, outlier_scale: 5.0 };
    let out = degrade(&depth, &noise, 3);
    let changed = depth.grid().iter().zip(out.grid().iter()).filter(|(a, b)| a != b).count();
    assert_eq!(changed, 200);
    assert_eq!(degrade(&depth, &NoiseSpec::default(), 3), depth);
}

#[test]
fn generation_is_deterministic() {
    let mut spec = SceneSpec::kitti_like_at(160, 48);
    spec.noise = NoiseSpec { sigma: 0.01, outlier_fraction: 0.05, outlier_scale: 3.0 };
    spec.seed = 9;
    let a = gen_scene(&spec).unwrap();
    let b = gen_scene(&spec).unwrap();
    let da = degrade(&a.depth, &spec.noise, spec.seed);
    let db = degrade(&b.depth, &spec.noise, spec.seed);
    assert_eq!(da.to_raw().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
               db.to_raw().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_ne!(da, degrade(&a.depth, &spec.noise, spec.seed + 1));
}

#[test]
fn relativize_and_recover_are_inverse() {
    let scene = gen_scene(&SceneSpec::kitti_like_at(160, 48)).unwrap();
    let rel = relativize(&scene.depth, 0.1).unwrap();
    assert_eq!(rel.kind(), DepthKind::Relative);
    let back = dgc_core::recover_absolute(&rel, 0.1).unwrap();
    for (a, b) in back.grid().iter().zip(scene.depth.grid().iter()) {
        if let (Some(a), Some(b)) = (a, b) {
            assert!((a - b).abs() <= 1e-9 * b);
        }
    }
    assert!(relativize(&scene.depth, 0.0).is_err());
}
