use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dgc_core::evaluation::{Crop, EvalConfig, ScaleMode};
use dgc_core::geometry::{DgcConfig, DEFAULT_LOW_CONFIDENCE_RATIO, DEFAULT_S_MAX_DEG};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "dgc", version, about = "Metric depth from relative depth and a known camera height")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scale a relative depth map to meters and report the estimate.
    Recover(RecoverArgs),
    /// Write the surface normal map as an RGB image.
    Normals(NormalsArgs),
    /// Write the detected ground mask.
    GroundMask(GroundMaskArgs),
    /// Score a directory of predictions against ground truth.
    Eval(EvalArgs),
    /// Scale error against the ground-truth median baseline, per frame.
    Sweep(SweepArgs),
    /// Which of the two scale estimates scores better, per metric.
    Compare(CompareArgs),
    /// Render a synthetic scene and its truth files.
    Synth(SynthArgs),
    /// Photometric and smoothness losses of a set of images.
    Loss(LossArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GroundArgs {
    /// Ground angle threshold, degrees.
    #[arg(long = "s-max-deg", default_value_t = DEFAULT_S_MAX_DEG)]
    pub s_max_deg: f64,
    /// Ground ratio below which estimates are flagged low-confidence.
    #[arg(long, default_value_t = DEFAULT_LOW_CONFIDENCE_RATIO)]
    pub low_confidence_ratio: f64,
}

impl GroundArgs {
    pub fn config(&self) -> CliResult<DgcConfig> {
        if !(self.s_max_deg > 0.0 && self.s_max_deg < 90.0) {
            return Err(CliError::Validation(format!(
                "--s-max-deg must be in (0, 90), got {}",
                self.s_max_deg
            )));
        }
        if !(self.low_confidence_ratio > 0.0 && self.low_confidence_ratio <= 1.0) {
            return Err(CliError::Validation(format!(
                "--low-confidence-ratio must be in (0, 1], got {}",
                self.low_confidence_ratio
            )));
        }
        Ok(DgcConfig {
            s_max_deg: self.s_max_deg,
            low_confidence_ratio: self.low_confidence_ratio,
            min_samples: 1,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalRangeArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub min_depth: f64,
    #[arg(long, default_value_t = 80.0)]
    pub max_depth: f64,
    /// Evaluation rectangle `x,y,w,h` in pixels.
    #[arg(long, value_parser = parse_crop)]
    pub crop: Option<Crop>,
}

impl EvalRangeArgs {
    pub fn config(&self) -> CliResult<EvalConfig> {
        let cfg = EvalConfig {
            min_depth: self.min_depth,
            max_depth: self.max_depth,
            mask: None,
            crop: self.crop,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_crop(s: &str) -> Result<Crop, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("crop '{s}' must be x,y,w,h in pixels"))?;
    match parts[..] {
        [x, y, width, height] if width > 0 && height > 0 => Ok(Crop { x, y, width, height }),
        _ => Err(format!("crop '{s}' must be x,y,w,h with positive size")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct RecoverArgs {
    /// Relative depth map (.pfm, .pgm, .png).
    #[arg(long)]
    pub depth: PathBuf,
    #[arg(long)]
    pub intrinsics: PathBuf,
    /// Camera mounting height, meters.
    #[arg(long)]
    pub camera_height: f64,
    #[command(flatten)]
    pub ground: GroundArgs,
    /// Absolute depth output; format from extension.
    #[arg(long)]
    pub output: PathBuf,
    /// JSON report path; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NormalsArgs {
    #[arg(long)]
    pub depth: PathBuf,
    #[arg(long)]
    pub intrinsics: PathBuf,
    /// PNG output.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GroundMaskArgs {
    #[arg(long)]
    pub depth: PathBuf,
    #[arg(long)]
    pub intrinsics: PathBuf,
    #[command(flatten)]
    pub ground: GroundArgs,
    /// PNG or PGM output.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
    /// Object masks matched to predictions by file stem.
    #[arg(long)]
    pub masks_dir: Option<PathBuf>,
    #[arg(long, default_value = "none")]
    pub scale_mode: ScaleMode,
    /// Intrinsics shared by every frame; required for `--scale-mode dgc`.
    #[arg(long)]
    pub intrinsics: Option<PathBuf>,
    /// Required for `--scale-mode dgc`.
    #[arg(long)]
    pub camera_height: Option<f64>,
    #[command(flatten)]
    pub ground: GroundArgs,
    #[command(flatten)]
    pub range: EvalRangeArgs,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Per-frame metrics.
    #[arg(long)]
    pub csv: PathBuf,
    /// Aggregate JSON.
    #[arg(long)]
    pub summary: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// CSV with columns `frame,depth,intrinsics,camera_height,gt`.
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub ground: GroundArgs,
    #[command(flatten)]
    pub range: EvalRangeArgs,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub csv: PathBuf,
    /// Error spread above and below the low-confidence ratio.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub ground: GroundArgs,
    #[command(flatten)]
    pub range: EvalRangeArgs,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Scene description (key = value lines).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the scene's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the scene's gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct LossArgs {
    /// Target view.
    #[arg(long)]
    pub target: PathBuf,
    /// Reconstructed or raw source views; repeatable.
    #[arg(long = "candidate", required = true)]
    pub candidates: Vec<PathBuf>,
    /// Target depth for the smoothness term.
    #[arg(long)]
    pub depth: Option<PathBuf>,
    #[arg(long, default_value_t = 0.85)]
    pub alpha: f64,
    /// JSON output; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Thread count for frame-level work; `0` means all cores.
pub fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Validation(format!("--jobs: {e}")))
}
