use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dgc_cli::formats::{read_depth, read_mask, write_depth, write_json, IntrinsicsFile};
use dgc_core::synthetic::{gen_scene, relativize, BoxObstacle, SceneSpec};
use dgc_core::DepthKind;
use serde_json::Value;
use tempfile::TempDir;

fn dgc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgc")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

/// Writes `scene.txt` and runs `synth` into `dir/out`.
fn synth(dir: &Path, scene: &str) -> PathBuf {
    let spec = dir.join("scene.txt");
    std::fs::write(&spec, scene).unwrap();
    let out = dir.join("out");
    let res = dgc(&["synth", "--spec", p(&spec), "--out-dir", p(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    out
}

#[test]
fn recover_round_trip_reports_gamma() {
    let dir = TempDir::new().unwrap();
    let out = synth(dir.path(), "gamma = 7.3\nwall_distance = 40\n");
    let report = dir.path().join("report.json");
    let abs = dir.path().join("abs.pfm");
    let res = dgc(&[
        "recover", "--depth", p(&out.join("relative.pfm")), "--intrinsics", p(&out.join("intrinsics.json")),
        "--camera-height", "1.65", "--output", p(&abs), "--report", p(&report),
    ]);
    assert!(res.status.success());
    let r = json_file(&report);
    let f = r["f_t"].as_f64().unwrap();
    // The relative map is stored as 32-bit floats.
    assert!((f - 7.3).abs() / 7.3 < 1e-6, "{f}");
    assert_eq!(r["low_confidence"], false);
    assert!(r["n_samples"].as_u64().unwrap() > 10_000);
    let recovered = read_depth(&abs, DepthKind::Absolute).unwrap();
    let truth = read_depth(&out.join("depth.pfm"), DepthKind::Absolute).unwrap();
    for (a, b) in recovered.grid().iter().zip(truth.grid().iter()) {
        assert_eq!(a.is_some(), b.is_some());
        if let (Some(a), Some(b)) = (a, b) {
            assert!((a - b).abs() / b < 1e-6);
        }
    }
}

#[test]
fn bad_focal_length_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let out = synth(dir.path(), "width = 64\nheight = 24\n");
    let k = dir.path().join("bad.json");
    std::fs::write(&k, r#"{"fx": 0, "fy": 40, "cx": 32, "cy": 12, "width": 64, "height": 24}"#).unwrap();
    let res = dgc(&[
        "recover", "--depth", p(&out.join("depth.pfm")), "--intrinsics", p(&k),
        "--camera-height", "1.65", "--output", p(&dir.path().join("x.pfm")),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_json(&res)["error"]["kind"], "validation");
    assert!(!dir.path().join("x.pfm").exists());
}

#[test]
fn no_ground_exits_three_with_json() {
    let dir = TempDir::new().unwrap();
    let out = synth(dir.path(), "width = 160\nheight = 48\nground = false\nwall_distance = 12\n");
    let report = dir.path().join("report.json");
    let res = dgc(&[
        "recover", "--depth", p(&out.join("depth.pfm")), "--intrinsics", p(&out.join("intrinsics.json")),
        "--camera-height", "1.65", "--output", p(&dir.path().join("x.pfm")), "--report", p(&report),
    ]);
    assert_eq!(res.status.code(), Some(3));
    let err = stderr_json(&res);
    assert_eq!(err["error"]["kind"], "no_ground");
    assert_eq!(err["error"]["ground_ratio"], 0.0);
    assert_eq!(json_file(&report), err);
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let res = dgc(&[
        "normals", "--depth", p(&dir.path().join("nope.pfm")), "--intrinsics", p(&dir.path().join("k.json")),
        "--output", p(&dir.path().join("n.png")),
    ]);
    assert_eq!(res.status.code(), Some(4));
    assert_eq!(stderr_json(&res)["error"]["kind"], "io");
}

#[test]
fn ground_mask_matches_truth_interior() {
    let dir = TempDir::new().unwrap();
    let out = synth(dir.path(), "width = 320\nheight = 96\nwall_distance = 25\n");
    for name in ["mask.png", "mask.pgm"] {
        let mask = dir.path().join(name);
        let res = dgc(&[
            "ground-mask", "--depth", p(&out.join("depth.pfm")), "--intrinsics", p(&out.join("intrinsics.json")),
            "--output", p(&mask),
        ]);
        assert!(res.status.success());
        let got = read_mask(&mask).unwrap();
        let mut spec = SceneSpec::kitti_like_at(320, 96);
        spec.wall_distance = Some(25.0);
        let scene = gen_scene(&spec).unwrap();
        let truth = scene.ground_truth();
        let interior = scene.interior_ground();
        for (r, c, m) in got.indexed() {
            if *interior.get(r, c) {
                assert!(*m, "{name}: ({r},{c}) missed");
            }
            if *m {
                assert!(truth.get(r, c), "{name}: ({r},{c}) outside truth");
            }
        }
    }
}

#[test]
fn wall_only_mask_is_black_and_normals_uniform() {
    let dir = TempDir::new().unwrap();
    let out = synth(dir.path(), "width = 64\nheight = 32\nground = false\nwall_distance = 9\n");
    let mask = dir.path().join("mask.png");
    let normals = dir.path().join("normals.png");
    let (depth, k) = (out.join("depth.pfm"), out.join("intrinsics.json"));
    let base = ["--depth", p(&depth), "--intrinsics", p(&k)];
    assert!(dgc(&[&["ground-mask"], &base[..], &["--output", p(&mask)]].concat()).status.success());
    assert!(read_mask(&mask).unwrap().iter().all(|m| !m));
    assert!(dgc(&[&["normals"], &base[..], &["--output", p(&normals)]].concat()).status.success());
    let img = image::open(&normals).unwrap().into_rgb8();
    let (w, h) = img.dimensions();
    let centre = *img.get_pixel(1, 1);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            assert_eq!(*img.get_pixel(x, y), centre);
        }
    }
    // Facing the camera: (0, 0, ±1) maps to mid-grey red and green.
    assert_eq!((centre[0], centre[1]), (128, 128));
    assert_eq!(*img.get_pixel(0, 0), image::Rgb([0, 0, 0]));
}

/// Writes `n` synthetic frames as pred (relative by `gamma`) and gt files.
fn eval_set(dir: &Path, n: usize, gamma: f64) -> (PathBuf, PathBuf, PathBuf) {
    let (pred, gt) = (dir.join("pred"), dir.join("gt"));
    std::fs::create_dir_all(&pred).unwrap();
    std::fs::create_dir_all(&gt).unwrap();
    let mut spec = SceneSpec::kitti_like_at(160, 48);
    spec.wall_distance = Some(40.0);
    for i in 0..n {
        let mut s = spec.clone();
        s.boxes.push(BoxObstacle::on_ground(-3.0 + i as f64, 12.0 + 3.0 * i as f64, 2.0, 1.5, 1.0, 1.65));
        let scene = gen_scene(&s).unwrap();
        write_depth(&gt.join(format!("{i:03}.pfm")), &scene.depth).unwrap();
        write_depth(&pred.join(format!("{i:03}.pfm")), &relativize(&scene.depth, gamma).unwrap()).unwrap();
    }
    let k = dir.join("intrinsics.json");
    write_json(&k, &IntrinsicsFile::new(&spec.intrinsics, 160, 48)).unwrap();
    (pred, gt, k)
}

fn run_eval(dir: &Path, pred: &Path, gt: &Path, extra: &[&str], tag: &str) -> (String, Value) {
    let csv = dir.join(format!("{tag}.csv"));
    let summary = dir.join(format!("{tag}.json"));
    let res = dgc(&[&["eval", "--pred-dir", p(pred), "--gt-dir", p(gt), "--csv", p(&csv), "--summary", p(&summary)], extra].concat());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    (std::fs::read_to_string(csv).unwrap(), json_file(&summary))
}

#[test]
fn eval_of_ground_truth_against_itself_is_zero() {
    let dir = TempDir::new().unwrap();
    let (_, gt, _) = eval_set(dir.path(), 3, 1.0);
    let (csv, summary) = run_eval(dir.path(), &gt, &gt, &["--scale-mode", "none"], "self");
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(summary["evaluated"], 3);
    for key in ["abs_rel", "sq_rel", "rmse", "rmse_log"] {
        assert_eq!(summary["mean"][key], 0.0, "{key}");
    }
    assert_eq!(summary["mean"]["delta1"], 1.0);
}

#[test]
fn dgc_and_median_modes_agree_on_exact_depth() {
    let dir = TempDir::new().unwrap();
    let (pred, gt, k) = eval_set(dir.path(), 4, 3.0);
    let (_, dgc_sum) = run_eval(dir.path(), &pred, &gt, &["--scale-mode", "dgc", "--intrinsics", p(&k), "--camera-height", "1.65"], "dgc");
    let (_, med_sum) = run_eval(dir.path(), &pred, &gt, &["--scale-mode", "gt-median"], "median");
    assert_eq!(dgc_sum["evaluated"], 4);
    for key in ["abs_rel", "sq_rel", "rmse", "rmse_log", "delta1", "delta2", "delta3"] {
        let a = dgc_sum["mean"][key].as_f64().unwrap();
        let b = med_sum["mean"][key].as_f64().unwrap();
        assert!((a - b).abs() < 1e-6, "{key}: {a} vs {b}");
    }
}

#[test]
fn dgc_mode_needs_intrinsics() {
    let dir = TempDir::new().unwrap();
    let (pred, gt, _) = eval_set(dir.path(), 1, 1.0);
    let res = dgc(&[
        "eval", "--pred-dir", p(&pred), "--gt-dir", p(&gt), "--scale-mode", "dgc", "--camera-height", "1.65",
        "--csv", p(&dir.path().join("a.csv")), "--summary", p(&dir.path().join("a.json")),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn all_true_masks_match_unmasked_eval() {
    let dir = TempDir::new().unwrap();
    let (pred, gt, _) = eval_set(dir.path(), 3, 2.0);
    let masks = dir.path().join("masks");
    std::fs::create_dir_all(&masks).unwrap();
    for i in 0..3 {
        dgc_cli::formats::write_mask(&masks.join(format!("{i:03}.png")), &dgc_core::Grid::filled(160, 48, true)).unwrap();
    }
    let (_, plain) = run_eval(dir.path(), &pred, &gt, &["--scale-mode", "gt-median"], "plain");
    let (_, masked) = run_eval(dir.path(), &pred, &gt, &["--scale-mode", "gt-median", "--masks-dir", p(&masks)], "masked");
    assert_eq!(plain["mean"], masked["mean"]);
}

#[test]
fn eval_marks_unmatched_frames() {
    let dir = TempDir::new().unwrap();
    let (pred, gt, _) = eval_set(dir.path(), 3, 1.0);
    std::fs::remove_file(gt.join("001.pfm")).unwrap();
    let (csv, summary) = run_eval(dir.path(), &pred, &gt, &["--scale-mode", "gt-median", "--jobs", "2"], "partial");
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows[0].starts_with("000,ok,"));
    assert!(rows[1].starts_with("001,io_error,"));
    assert!(rows[2].starts_with("002,ok,"));
    assert_eq!(summary["evaluated"], 2);
    assert_eq!(summary["failed"], 1);
}

fn manifest(dir: &Path, frames: usize) -> PathBuf {
    // A power-of-two scale keeps the 32-bit files exact relative to each other.
    let (pred, gt, _) = eval_set(dir, frames, 2.0);
    let k = std::fs::canonicalize(dir.join("intrinsics.json")).unwrap();
    let mut text = String::from("frame,depth,intrinsics,camera_height,gt\n");
    for i in 0..frames {
        text += &format!(
            "f{i:03},pred/{i:03}.pfm,{},1.65,{}\n",
            p(&k),
            p(&gt.join(format!("{i:03}.pfm")))
        );
    }
    let _ = pred;
    let path = dir.join("manifest.csv");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn sweep_on_exact_frames() {
    let dir = TempDir::new().unwrap();
    let m = manifest(dir.path(), 5);
    let csv = dir.path().join("sweep.csv");
    let summary = dir.path().join("sweep.json");
    let res = dgc(&["sweep", "--manifest", p(&m), "--csv", p(&csv), "--summary", p(&summary), "--jobs", "3"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("frame,ground_ratio,scale_error,status"));
    let mut ratios = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], format!("f{i:03}"));
        assert_eq!(cols[3], "ok");
        assert!(cols[2].parse::<f64>().unwrap().abs() < 1e-6);
        ratios.push(cols[1].parse::<f64>().unwrap());
    }
    assert_eq!(ratios.len(), 5);
    // Boxes march off into the distance, hiding less ground each frame.
    assert!(ratios.windows(2).all(|w| w[0] <= w[1]), "{ratios:?}");
    assert_eq!(json_file(&summary)["summary"]["above"]["frames"], 5);
}

#[test]
fn sweep_isolates_a_corrupt_frame() {
    let dir = TempDir::new().unwrap();
    let m = manifest(dir.path(), 4);
    std::fs::write(dir.path().join("pred/002.pfm"), b"garbage").unwrap();
    let csv = dir.path().join("sweep.csv");
    assert!(dgc(&["sweep", "--manifest", p(&m), "--csv", p(&csv)]).status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let status: Vec<&str> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(status, ["ok", "ok", "io_error", "ok"]);
}

#[test]
fn empty_manifest_gives_header_only() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("empty.csv");
    std::fs::write(&m, "").unwrap();
    let csv = dir.path().join("sweep.csv");
    let res = dgc(&["sweep", "--manifest", p(&m), "--csv", p(&csv)]);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), "frame,ground_ratio,scale_error,status\n");
}

#[test]
fn compare_scores_every_frame() {
    // Ground geometry stored as 32-bit floats is only exact to ~1e-7, so the
    // two estimates agree closely but are not bitwise ties.
    let dir = TempDir::new().unwrap();
    let m = manifest(dir.path(), 3);
    let out = dir.path().join("compare.json");
    assert!(dgc(&["compare", "--manifest", p(&m), "--output", p(&out), "--jobs", "2"]).status.success());
    let v = json_file(&out);
    for key in ["abs_rel", "sq_rel", "rmse", "rmse_log"] {
        let t = &v["metrics"][key];
        let total: u64 = ["dgc_better", "gt_better", "ties"].iter().map(|k| t[k].as_u64().unwrap()).sum();
        assert_eq!(total, 3, "{key}");
    }
    for f in v["per_frame"].as_array().unwrap() {
        assert_eq!(f["status"], "ok");
        assert!(f["dgc"]["abs_rel"].as_f64().unwrap() < 1e-6);
        assert!(f["gt"]["abs_rel"].as_f64().unwrap() < 1e-6);
    }
}

#[test]
fn loss_report() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("t.png");
    let other = dir.path().join("o.png");
    image::GrayImage::from_fn(16, 12, |x, y| image::Luma([(x * 10 + y) as u8])).save(&target).unwrap();
    image::GrayImage::from_fn(16, 12, |x, _| image::Luma([(x * 7) as u8])).save(&other).unwrap();
    let out = dir.path().join("loss.json");
    let res = dgc(&["loss", "--target", p(&target), "--candidate", p(&other), "--candidate", p(&target), "--output", p(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let v = json_file(&out);
    assert_eq!(v["min_reprojection"], 0.0);
    assert_eq!(v["candidates"][1]["mean_error"], 0.0);
    assert!(v["candidates"][0]["mean_error"].as_f64().unwrap() > 0.0);
    assert_eq!(v["smoothness"], Value::Null);
}

#[test]
fn synth_seed_changes_noise() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("s.txt");
    std::fs::write(&spec, "width = 64\nheight = 24\nnoise_sigma = 0.01\n").unwrap();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        assert!(dgc(&["synth", "--spec", p(&spec), "--out-dir", p(&out), "--seed", seed]).status.success());
        std::fs::read(out.join("depth.pfm")).unwrap()
    };
    assert_eq!(run("1", "a"), run("1", "b"));
    assert_ne!(run("1", "a"), run("2", "c"));
}
