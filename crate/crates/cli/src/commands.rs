//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dgc_core::evaluation::{
    compare_estimators, compute_metrics, gt_median_scale, masked_metrics, summarize_sweep,
    sweep_frame, Comparison, DepthMetrics, ErrorMetric, EvalConfig, FrameComparison, MetricTally,
    ScaleMode,
};
use dgc_core::geometry::{backproject, compute_normal_map, detect_ground, dgc_pipeline, DgcConfig};
use dgc_core::photometric::{min_reprojection_loss, photometric_error, smoothness_loss};
use dgc_core::synthetic::{degrade, gen_scene, relativize};
use dgc_core::{CameraIntrinsics, DepthKind, DepthMap};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::{
    pool, CompareArgs, Command, EvalArgs, GroundMaskArgs, LossArgs, NormalsArgs, RecoverArgs,
    SweepArgs, SynthArgs,
};
use crate::error::{CliError, CliResult};
use crate::formats::{
    read_depth, read_image, read_intrinsics, read_mask, write_atomic, write_depth, write_json,
    write_mask, write_normals, IntrinsicsFile,
};
use crate::manifest::{read_manifest, ManifestRow};
use crate::scene_config::{format_scene, parse_scene};

/// Statuses for frames that never reached the estimator.
pub const STATUS_IO_ERROR: &str = "io_error";
pub const STATUS_INVALID: &str = "invalid_input";

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Recover(a) => {
            let report = a.report.clone();
            let result = recover(&a);
            if let (Err(e), Some(path)) = (&result, report) {
                // The report is best effort once the run has already failed.
                let _ = write_json(&path, &e.to_json());
            }
            result
        }
        Command::Normals(a) => normals(&a),
        Command::GroundMask(a) => ground_mask(&a),
        Command::Eval(a) => eval(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Compare(a) => compare(&a),
        Command::Synth(a) => synth(&a),
        Command::Loss(a) => loss(&a),
    }
}

fn check_camera_height(h: f64) -> CliResult<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!("--camera-height must be positive, got {h}")))
    }
}

fn load_relative(depth: &Path, intrinsics: &Path) -> CliResult<(DepthMap, CameraIntrinsics)> {
    let k = read_intrinsics(intrinsics)?;
    let depth = read_depth(depth, DepthKind::Relative)?;
    let k = k.for_depth(&depth)?;
    Ok((depth, k))
}

#[derive(Debug, Serialize)]
pub struct RecoverReport {
    /// Median per-point camera height in relative units.
    pub h_m: f64,
    /// Known camera height, meters.
    pub h_r: f64,
    /// Scale factor applied to the relative depth.
    pub f_t: f64,
    pub ground_ratio: f64,
    pub n_samples: usize,
    pub low_confidence: bool,
}

fn recover(a: &RecoverArgs) -> CliResult<()> {
    let cfg = a.ground.config()?;
    check_camera_height(a.camera_height)?;
    let (depth, k) = load_relative(&a.depth, &a.intrinsics)?;
    let out = dgc_pipeline(&depth, &k, a.camera_height, &cfg)?;
    let e = &out.estimate;
    let report = RecoverReport {
        h_m: e.estimated_height,
        h_r: e.real_height,
        f_t: e.scale_factor,
        ground_ratio: e.ground_ratio,
        n_samples: e.n_samples,
        low_confidence: e.low_confidence,
    };
    write_depth(&a.output, &out.absolute)?;
    match &a.report {
        Some(path) => write_json(path, &report),
        None => {
            let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::io("json", e))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn normals(a: &NormalsArgs) -> CliResult<()> {
    let (depth, k) = load_relative(&a.depth, &a.intrinsics)?;
    let points = backproject(&depth, &k)?;
    write_normals(&a.output, &compute_normal_map(&points))
}

fn ground_mask(a: &GroundMaskArgs) -> CliResult<()> {
    let cfg = a.ground.config()?;
    let (depth, k) = load_relative(&a.depth, &a.intrinsics)?;
    let points = backproject(&depth, &k)?;
    let normals = compute_normal_map(&points);
    let mask = detect_ground(&normals, &points, cfg.s_max_deg)?;
    write_mask(&a.output, mask.grid())
}

const DEPTH_EXTENSIONS: [&str; 3] = ["pfm", "pgm", "png"];

fn lower_ext(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

/// Depth files in `dir` keyed by stem, sorted.
fn depth_files(dir: &Path) -> CliResult<Vec<(String, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
    let mut files = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir.display().to_string(), e))?.path();
        if !path.is_file() || !lower_ext(&path).is_some_and(|e| DEPTH_EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
            continue;
        };
        if let Some(prev) = files.insert(stem.clone(), path.clone()) {
            return Err(CliError::Validation(format!(
                "two files share the stem '{stem}': {} and {}",
                prev.display(),
                path.display()
            )));
        }
    }
    Ok(files.into_iter().collect())
}

fn find_by_stem(dir: &Path, stem: &str, extensions: &[&str]) -> CliResult<PathBuf> {
    extensions
        .iter()
        .map(|ext| dir.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
        .ok_or_else(|| CliError::io(dir.display().to_string(), format!("no file for frame '{stem}'")))
}

fn frame_status(e: &CliError) -> &'static str {
    match e {
        CliError::Io { .. } => STATUS_IO_ERROR,
        CliError::NoGround { .. } => "no_ground",
        CliError::Validation(_) => STATUS_INVALID,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub frame: String,
    pub status: String,
    pub scale: Option<f64>,
    pub metrics: Option<DepthMetrics>,
    pub message: Option<String>,
}

struct EvalJob<'a> {
    args: &'a EvalArgs,
    dgc: DgcConfig,
    eval: EvalConfig,
    intrinsics: Option<IntrinsicsFile>,
}

impl EvalJob<'_> {
    fn frame(&self, stem: &str, pred_path: &Path) -> CliResult<(f64, DepthMetrics)> {
        let a = self.args;
        let kind = match a.scale_mode {
            ScaleMode::None => DepthKind::Absolute,
            _ => DepthKind::Relative,
        };
        let load = |r: CliResult<DepthMap>| {
            r.map_err(|e| match e {
                CliError::Validation(m) => CliError::io("read", m),
                other => other,
            })
        };
        let pred = load(read_depth(pred_path, kind))?;
        let gt = load(read_depth(&find_by_stem(&a.gt_dir, stem, &DEPTH_EXTENSIONS)?, DepthKind::Absolute))?;
        let mask = match &a.masks_dir {
            Some(dir) => Some(read_mask(&find_by_stem(dir, stem, &["png", "pgm"])?).map_err(|e| match e {
                CliError::Validation(m) => CliError::io("read", m),
                other => other,
            })?),
            None => None,
        };
        let scale = match a.scale_mode {
            ScaleMode::None => 1.0,
            ScaleMode::GtMedian => gt_median_scale(&pred, &gt, &self.eval)?,
            ScaleMode::Dgc => {
                let k = self.intrinsics.as_ref().expect("checked before the run").for_depth(&pred)?;
                let h = a.camera_height.expect("checked before the run");
                dgc_pipeline(&pred, &k, h, &self.dgc)?.estimate.scale_factor
            }
        };
        let scaled = pred.scaled(scale, DepthKind::Absolute);
        let metrics = match &mask {
            Some(m) => masked_metrics(&scaled, &gt, m, &self.eval)?,
            None => compute_metrics(&scaled, &gt, &self.eval)?,
        };
        Ok((scale, metrics))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::io(path.display().to_string(), e);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path.display().to_string(), e))?;
    write_atomic(path, &bytes)
}

pub const EVAL_COLUMNS: [&str; 11] = [
    "frame", "status", "scale", "abs_rel", "sq_rel", "rmse", "rmse_log", "delta1", "delta2",
    "delta3", "message",
];

fn eval(a: &EvalArgs) -> CliResult<()> {
    let dgc = a.ground.config()?;
    let eval = a.range.config()?;
    let intrinsics = match a.scale_mode {
        ScaleMode::Dgc => {
            let path = a.intrinsics.as_ref().ok_or_else(|| {
                CliError::Validation("--scale-mode dgc needs --intrinsics".into())
            })?;
            let h = a.camera_height.ok_or_else(|| {
                CliError::Validation("--scale-mode dgc needs --camera-height".into())
            })?;
            check_camera_height(h)?;
            Some(read_intrinsics(path)?)
        }
        _ => None,
    };
    let files = depth_files(&a.pred_dir)?;
    let job = EvalJob { args: a, dgc, eval, intrinsics };
    let rows: Vec<EvalRow> = pool(a.jobs)?.install(|| {
        files
            .par_iter()
            .map(|(stem, path)| match job.frame(stem, path) {
                Ok((scale, m)) => EvalRow {
                    frame: stem.clone(),
                    status: "ok".into(),
                    scale: Some(scale),
                    metrics: Some(m),
                    message: None,
                },
                Err(e) => EvalRow {
                    frame: stem.clone(),
                    status: frame_status(&e).into(),
                    scale: None,
                    metrics: None,
                    message: Some(e.to_string()),
                },
            })
            .collect()
    });

    write_csv(
        &a.csv,
        &EVAL_COLUMNS,
        rows.iter().map(|r| {
            let m = r.metrics;
            let pick = |f: fn(&DepthMetrics) -> f64| fmt_opt(m.as_ref().map(f));
            vec![
                r.frame.clone(),
                r.status.clone(),
                fmt_opt(r.scale),
                pick(|m| m.abs_rel),
                pick(|m| m.sq_rel),
                pick(|m| m.rmse),
                pick(|m| m.rmse_log),
                pick(|m| m.delta1),
                pick(|m| m.delta2),
                pick(|m| m.delta3),
                r.message.clone().unwrap_or_default(),
            ]
        }),
    )?;

    let ok: Vec<DepthMetrics> = rows.iter().filter_map(|r| r.metrics).collect();
    let mut status_counts = BTreeMap::<&str, usize>::new();
    for r in &rows {
        *status_counts.entry(r.status.as_str()).or_default() += 1;
    }
    let summary = json!({
        "scale_mode": a.scale_mode,
        "frames": rows.len(),
        "evaluated": ok.len(),
        "failed": rows.len() - ok.len(),
        "status_counts": status_counts,
        "mean": DepthMetrics::mean(&ok),
    });
    write_json(&a.summary, &summary)
}

/// One line of `sweep` output.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub frame: String,
    pub ground_ratio: Option<f64>,
    pub scale_error: Option<f64>,
    pub status: String,
}

pub const SWEEP_COLUMNS: [&str; 4] = ["frame", "ground_ratio", "scale_error", "status"];

fn load_frames(
    rows: &[ManifestRow],
    jobs: usize,
) -> CliResult<Vec<Result<dgc_core::evaluation::Frame, CliError>>> {
    Ok(pool(jobs)?.install(|| rows.par_iter().map(ManifestRow::load).collect()))
}

fn sweep(a: &SweepArgs) -> CliResult<()> {
    let dgc = a.ground.config()?;
    let eval = a.range.config()?;
    let manifest = read_manifest(&a.manifest)?;
    let records = pool(a.jobs)?.install(|| {
        manifest
            .par_iter()
            .map(|row| row.load().map(|f| sweep_frame(&f, &dgc, &eval)))
            .collect::<Vec<_>>()
    });
    let rows: Vec<SweepRow> = manifest
        .iter()
        .zip(&records)
        .map(|(m, r)| match r {
            Ok(r) => SweepRow {
                frame: r.frame.clone(),
                ground_ratio: Some(r.ground_ratio),
                scale_error: r.scale_error,
                status: r.status.as_str().into(),
            },
            Err(_) => SweepRow {
                frame: m.frame.clone(),
                ground_ratio: None,
                scale_error: None,
                status: STATUS_IO_ERROR.into(),
            },
        })
        .collect();
    write_csv(
        &a.csv,
        &SWEEP_COLUMNS,
        rows.iter().map(|r| {
            vec![r.frame.clone(), fmt_opt(r.ground_ratio), fmt_opt(r.scale_error), r.status.clone()]
        }),
    )?;
    if let Some(path) = &a.summary {
        let ok: Vec<_> = records.iter().filter_map(|r| r.as_ref().ok()).cloned().collect();
        let errors: Vec<_> = manifest
            .iter()
            .zip(&records)
            .filter_map(|(m, r)| r.as_ref().err().map(|e| json!({"frame": m.frame, "message": e.to_string()})))
            .collect();
        let summary = summarize_sweep(&ok, dgc.low_confidence_ratio);
        write_json(path, &json!({ "summary": summary, "load_errors": errors }))?;
    }
    Ok(())
}

fn tally_json(t: &MetricTally) -> serde_json::Value {
    json!({
        "dgc_better": t.dgc_better,
        "gt_better": t.gt_better,
        "ties": t.ties,
        "dgc_better_ratio": t.dgc_better_ratio(),
    })
}

fn merge(into: &mut MetricTally, from: &MetricTally) {
    into.dgc_better += from.dgc_better;
    into.gt_better += from.gt_better;
    into.ties += from.ties;
}

fn compare(a: &CompareArgs) -> CliResult<()> {
    let dgc = a.ground.config()?;
    let eval = a.range.config()?;
    let manifest = read_manifest(&a.manifest)?;
    let frames = load_frames(&manifest, a.jobs)?;
    let parts: Vec<Option<Comparison>> = pool(a.jobs)?.install(|| {
        frames
            .par_iter()
            .map(|f| f.as_ref().ok().map(|f| compare_estimators(std::slice::from_ref(f), &dgc, &eval)))
            .collect()
    });
    let mut total = Comparison {
        frames: Vec::new(),
        abs_rel: MetricTally::default(),
        sq_rel: MetricTally::default(),
        rmse: MetricTally::default(),
        rmse_log: MetricTally::default(),
    };
    for part in parts.iter().flatten() {
        total.frames.extend(part.frames.iter().cloned());
        merge(&mut total.abs_rel, &part.abs_rel);
        merge(&mut total.sq_rel, &part.sq_rel);
        merge(&mut total.rmse, &part.rmse);
        merge(&mut total.rmse_log, &part.rmse_log);
    }
    let metrics: BTreeMap<&str, serde_json::Value> = ErrorMetric::ALL
        .iter()
        .map(|m| (m.name(), tally_json(total.tally(*m))))
        .collect();
    let load_errors: Vec<_> = manifest
        .iter()
        .zip(&frames)
        .filter_map(|(m, f)| f.as_ref().err().map(|e| json!({"frame": m.frame, "message": e.to_string()})))
        .collect();
    let per_frame: &[FrameComparison] = &total.frames;
    write_json(
        &a.output,
        &json!({
            "frames": manifest.len(),
            "metrics": metrics,
            "per_frame": per_frame,
            "load_errors": load_errors,
        }),
    )
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| CliError::io(a.spec.display().to_string(), e))?;
    let mut scene_file = parse_scene(&text)?;
    if let Some(seed) = a.seed {
        scene_file.spec.seed = seed;
    }
    if let Some(g) = a.gamma {
        scene_file.gamma = Some(g);
    }
    let spec = &scene_file.spec;
    let scene = gen_scene(spec)?;
    let depth = if spec.noise.is_noop() {
        scene.depth.clone()
    } else {
        degrade(&scene.depth, &spec.noise, spec.seed)
    };
    let relative = scene_file.gamma.map(|g| relativize(&depth, g)).transpose()?;

    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(a.out_dir.display().to_string(), e))?;
    let out = |name: &str| a.out_dir.join(name);
    write_depth(&out("depth.pfm"), &depth)?;
    if let Some(rel) = &relative {
        write_depth(&out("relative.pfm"), rel)?;
    }
    let truth = scene.ground_truth();
    write_mask(&out("ground_truth.png"), truth.grid())?;
    write_normals(&out("normals_truth.png"), &scene.normals)?;
    write_json(&out("intrinsics.json"), &IntrinsicsFile::new(&spec.intrinsics, spec.width, spec.height))?;
    let n = spec.ground_normal();
    write_json(
        &out("truth.json"),
        &json!({
            "camera_height": spec.camera_height,
            "pitch_deg": spec.pitch_deg,
            "gamma": scene_file.gamma,
            "seed": spec.seed,
            "width": spec.width,
            "height": spec.height,
            "ground_normal": [n.x, n.y, n.z],
            "ground_pixels": truth.ground_pixel_count(),
            "valid_pixels": truth.valid_pixels(),
            "ground_ratio": truth.ground_ratio(),
        }),
    )?;
    write_atomic(&out("scene.txt"), format_scene(&scene_file).as_bytes())
}

fn mean_of(grid: &dgc_core::Grid<f64>) -> f64 {
    grid.iter().sum::<f64>() / grid.len() as f64
}

fn loss(a: &LossArgs) -> CliResult<()> {
    let target = read_image(&a.target)?;
    let candidates = a.candidates.iter().map(|p| read_image(p)).collect::<CliResult<Vec<_>>>()?;
    let per_candidate = a
        .candidates
        .iter()
        .zip(&candidates)
        .map(|(p, c)| {
            Ok(json!({
                "path": p.display().to_string(),
                "mean_error": mean_of(&photometric_error(&target, c, a.alpha)?),
            }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let refs: Vec<_> = candidates.iter().collect();
    let min_loss = mean_of(&min_reprojection_loss(&target, &refs, a.alpha)?);
    let smoothness = match &a.depth {
        Some(p) => Some(smoothness_loss(&read_depth(p, DepthKind::Relative)?, &target)?),
        None => None,
    };
    let report = json!({
        "alpha": a.alpha,
        "candidates": per_candidate,
        "min_reprojection": min_loss,
        "smoothness": smoothness,
    });
    match &a.output {
        Some(path) => write_json(path, &report),
        None => {
            println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::io("json", e))?);
            Ok(())
        }
    }
}
