//! Depth benchmark metrics, the ground-truth median scale baseline, and the
//! per-frame comparison of camera-height scale recovery against it.

use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::depth::{DepthKind, DepthMap};
use crate::error::{EvalError, GeometryError};
use crate::geometry::{dgc_pipeline, DgcConfig};
use crate::grid::Grid;
use crate::stats;

/// Ties in [`compare_estimators`] are decided with this relative tolerance.
pub const TIE_RELATIVE_TOLERANCE: f64 = 1e-9;

/// Metric values this close are a tie regardless of magnitude; exact
/// predictions leave rounding residue of this order.
pub const TIE_ABSOLUTE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
}

impl DepthMetrics {
    pub fn get(&self, metric: ErrorMetric) -> f64 {
        match metric {
            ErrorMetric::AbsRel => self.abs_rel,
            ErrorMetric::SqRel => self.sq_rel,
            ErrorMetric::Rmse => self.rmse,
            ErrorMetric::RmseLog => self.rmse_log,
        }
    }

    /// Component-wise mean.
    pub fn mean(all: &[DepthMetrics]) -> Option<DepthMetrics> {
        if all.is_empty() {
            return None;
        }
        let n = all.len() as f64;
        let avg = |f: fn(&DepthMetrics) -> f64| all.iter().map(f).sum::<f64>() / n;
        Some(DepthMetrics {
            abs_rel: avg(|m| m.abs_rel),
            sq_rel: avg(|m| m.sq_rel),
            rmse: avg(|m| m.rmse),
            rmse_log: avg(|m| m.rmse_log),
            delta1: avg(|m| m.delta1),
            delta2: avg(|m| m.delta2),
            delta3: avg(|m| m.delta3),
        })
    }
}

/// The lower-is-better columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    AbsRel,
    SqRel,
    Rmse,
    RmseLog,
}

impl ErrorMetric {
    pub const ALL: [ErrorMetric; 4] = [
        ErrorMetric::AbsRel,
        ErrorMetric::SqRel,
        ErrorMetric::Rmse,
        ErrorMetric::RmseLog,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ErrorMetric::AbsRel => "abs_rel",
            ErrorMetric::SqRel => "sq_rel",
            ErrorMetric::Rmse => "rmse",
            ErrorMetric::RmseLog => "rmse_log",
        }
    }
}

/// Pixel rectangle `x, y, width, height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crop {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Crop {
    #[inline]
    fn contains(&self, row: usize, col: usize) -> bool {
        col >= self.x && col < self.x + self.width && row >= self.y && row < self.y + self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub min_depth: f64,
    pub max_depth: f64,
    pub mask: Option<Grid<bool>>,
    pub crop: Option<Crop>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            min_depth: 1e-3,
            max_depth: 80.0,
            mask: None,
            crop: None,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.min_depth > 0.0 && self.min_depth < self.max_depth) {
            return Err(EvalError::InvalidConfig(format!(
                "need 0 < min_depth < max_depth, got {} and {}",
                self.min_depth, self.max_depth
            )));
        }
        Ok(())
    }
}

fn check_dims(expected: (usize, usize), got: (usize, usize)) -> Result<(), EvalError> {
    if expected != got {
        return Err(EvalError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `(pred, gt)` pairs over pixels passing the config and the optional mask.
/// Ground truth outside `(min_depth, max_depth)` is dropped; the prediction
/// is returned unclamped.
fn eval_pairs(
    pred: &DepthMap,
    gt: &DepthMap,
    cfg: &EvalConfig,
    mask: Option<&Grid<bool>>,
) -> Result<Vec<(f64, f64)>, EvalError> {
    cfg.validate()?;
    check_dims(gt.dims(), pred.dims())?;
    for m in cfg.mask.iter().chain(mask) {
        check_dims(gt.dims(), m.dims())?;
    }
    let mut pairs = Vec::new();
    for (row, col, g) in gt.grid().indexed() {
        let Some(g) = *g else { continue };
        if !(g > cfg.min_depth && g < cfg.max_depth) {
            continue;
        }
        if cfg.crop.is_some_and(|c| !c.contains(row, col))
            || cfg.mask.as_ref().is_some_and(|m| !m.get(row, col))
            || mask.is_some_and(|m| !m.get(row, col))
        {
            continue;
        }
        if let Some(p) = pred.get(row, col) {
            pairs.push((p, g));
        }
    }
    if pairs.is_empty() {
        return Err(EvalError::NoValidPixels);
    }
    Ok(pairs)
}

fn metrics_from_pairs(pairs: &[(f64, f64)], cfg: &EvalConfig) -> DepthMetrics {
    let n = pairs.len() as f64;
    let mut abs_rel = 0.0;
    let mut sq_rel = 0.0;
    let mut sq = 0.0;
    let mut sq_log = 0.0;
    let mut within = [0usize; 3];
    for &(p, g) in pairs {
        let p = p.clamp(cfg.min_depth, cfg.max_depth);
        let diff = p - g;
        abs_rel += diff.abs() / g;
        sq_rel += diff * diff / g;
        sq += diff * diff;
        let dl = p.ln() - g.ln();
        sq_log += dl * dl;
        let ratio = (p / g).max(g / p);
        let mut bound = 1.25;
        for count in within.iter_mut() {
            if ratio < bound {
                *count += 1;
            }
            bound *= 1.25;
        }
    }
    DepthMetrics {
        abs_rel: abs_rel / n,
        sq_rel: sq_rel / n,
        rmse: (sq / n).sqrt(),
        rmse_log: (sq_log / n).sqrt(),
        delta1: within[0] as f64 / n,
        delta2: within[1] as f64 / n,
        delta3: within[2] as f64 / n,
    }
}

/// Standard depth metrics; `pred` is clamped to the config's depth range.
pub fn compute_metrics(
    pred: &DepthMap,
    gt: &DepthMap,
    cfg: &EvalConfig,
) -> Result<DepthMetrics, EvalError> {
    if pred.kind() != DepthKind::Absolute {
        return Err(EvalError::RelativePrediction);
    }
    let pairs = eval_pairs(pred, gt, cfg, None)?;
    Ok(metrics_from_pairs(&pairs, cfg))
}

/// [`compute_metrics`] restricted to `object_mask`.
pub fn masked_metrics(
    pred: &DepthMap,
    gt: &DepthMap,
    object_mask: &Grid<bool>,
    cfg: &EvalConfig,
) -> Result<DepthMetrics, EvalError> {
    if pred.kind() != DepthKind::Absolute {
        return Err(EvalError::RelativePrediction);
    }
    let pairs = eval_pairs(pred, gt, cfg, Some(object_mask))?;
    Ok(metrics_from_pairs(&pairs, cfg))
}

/// Ratio of the ground-truth median to the prediction median over the
/// pixels both cover.
pub fn gt_median_scale(pred: &DepthMap, gt: &DepthMap, cfg: &EvalConfig) -> Result<f64, EvalError> {
    let pairs = eval_pairs(pred, gt, cfg, None)?;
    let (mut p, mut g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let gm = stats::median_in_place(&mut g).ok_or(EvalError::NoValidPixels)?;
    let pm = stats::median_in_place(&mut p).ok_or(EvalError::NoValidPixels)?;
    Ok(gm / pm)
}

/// How a relative prediction is brought to metric scale before evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// Camera-height scale recovery.
    Dgc,
    /// Median ratio against ground truth.
    GtMedian,
    /// Prediction is already metric.
    None,
}

impl std::str::FromStr for ScaleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dgc" => Ok(Self::Dgc),
            "gt-median" | "gt_median" | "gt" => Ok(Self::GtMedian),
            "none" => Ok(Self::None),
            other => Err(format!("unknown scale mode '{other}', expected dgc, gt-median or none")),
        }
    }
}

/// One frame of relative prediction with everything needed to score it.
#[derive(Debug, Clone)]
pub struct Frame {
    pub id: String,
    pub depth: DepthMap,
    pub intrinsics: CameraIntrinsics,
    pub camera_height: f64,
    pub gt: DepthMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStatus {
    Ok,
    NoGround,
    DgcError,
    GtError,
}

impl FrameStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameStatus::Ok => "ok",
            FrameStatus::NoGround => "no_ground",
            FrameStatus::DgcError => "dgc_error",
            FrameStatus::GtError => "gt_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub frame: String,
    pub ground_ratio: f64,
    /// `(f_dgc − f_gt) / f_gt`, absent unless both estimators succeeded.
    pub scale_error: Option<f64>,
    pub status: FrameStatus,
    pub low_confidence: bool,
    pub dgc_scale: Option<f64>,
    pub gt_scale: Option<f64>,
}

struct FrameScales {
    ground_ratio: f64,
    low_confidence: bool,
    dgc: Result<f64, FrameStatus>,
    gt: Result<f64, FrameStatus>,
}

fn frame_scales(frame: &Frame, dgc: &DgcConfig, eval: &EvalConfig) -> FrameScales {
    let (ground_ratio, low_confidence, dgc) =
        match dgc_pipeline(&frame.depth, &frame.intrinsics, frame.camera_height, dgc) {
            Ok(out) => (
                out.estimate.ground_ratio,
                out.estimate.low_confidence,
                Ok(out.estimate.scale_factor),
            ),
            Err(GeometryError::NoGround { ground_ratio, .. }) => {
                (ground_ratio, true, Err(FrameStatus::NoGround))
            }
            Err(_) => (0.0, true, Err(FrameStatus::DgcError)),
        };
    let gt = gt_median_scale(&frame.depth, &frame.gt, eval).map_err(|_| FrameStatus::GtError);
    FrameScales {
        ground_ratio,
        low_confidence,
        dgc,
        gt,
    }
}

/// Ground ratio and relative scale error of one frame.
pub fn sweep_frame(frame: &Frame, dgc: &DgcConfig, eval: &EvalConfig) -> SweepRecord {
    let s = frame_scales(frame, dgc, eval);
    let (scale_error, status) = match (s.dgc, s.gt) {
        (Ok(d), Ok(g)) => (Some((d - g) / g), FrameStatus::Ok),
        (Err(e), _) | (_, Err(e)) => (None, e),
    };
    SweepRecord {
        frame: frame.id.clone(),
        ground_ratio: s.ground_ratio,
        scale_error,
        status,
        low_confidence: s.low_confidence,
        dgc_scale: s.dgc.ok(),
        gt_scale: s.gt.ok(),
    }
}

/// [`sweep_frame`] over every frame, in input order.
pub fn robustness_sweep(frames: &[Frame], dgc: &DgcConfig, eval: &EvalConfig) -> Vec<SweepRecord> {
    frames.iter().map(|f| sweep_frame(f, dgc, eval)).collect()
}

/// Spread of scale errors for frames on one side of a ground-ratio threshold.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorSpread {
    pub frames: usize,
    pub failed: usize,
    pub max_abs_error: f64,
    pub rms_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub threshold: f64,
    pub above: ErrorSpread,
    pub below: ErrorSpread,
}

pub fn summarize_sweep(records: &[SweepRecord], threshold: f64) -> SweepSummary {
    let spread = |above: bool| {
        let side: Vec<&SweepRecord> = records
            .iter()
            .filter(|r| (r.ground_ratio >= threshold) == above)
            .collect();
        let errors: Vec<f64> = side.iter().filter_map(|r| r.scale_error).collect();
        ErrorSpread {
            frames: side.len(),
            failed: side.len() - errors.len(),
            max_abs_error: errors.iter().fold(0.0, |m, e| m.max(e.abs())),
            rms_error: stats::mean(&errors.iter().map(|e| e * e).collect::<Vec<_>>())
                .map_or(0.0, f64::sqrt),
        }
    };
    SweepSummary {
        threshold,
        above: spread(true),
        below: spread(false),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameComparison {
    pub frame: String,
    pub status: FrameStatus,
    pub dgc: Option<DepthMetrics>,
    pub gt: Option<DepthMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricTally {
    pub dgc_better: usize,
    pub gt_better: usize,
    pub ties: usize,
}

impl MetricTally {
    pub fn compared(&self) -> usize {
        self.dgc_better + self.gt_better + self.ties
    }

    /// Share of compared frames where camera-height scaling scored lower.
    pub fn dgc_better_ratio(&self) -> f64 {
        match self.compared() {
            0 => 0.0,
            n => self.dgc_better as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub frames: Vec<FrameComparison>,
    pub abs_rel: MetricTally,
    pub sq_rel: MetricTally,
    pub rmse: MetricTally,
    pub rmse_log: MetricTally,
}

impl Comparison {
    pub fn tally(&self, metric: ErrorMetric) -> &MetricTally {
        match metric {
            ErrorMetric::AbsRel => &self.abs_rel,
            ErrorMetric::SqRel => &self.sq_rel,
            ErrorMetric::Rmse => &self.rmse,
            ErrorMetric::RmseLog => &self.rmse_log,
        }
    }

    fn tally_mut(&mut self, metric: ErrorMetric) -> &mut MetricTally {
        match metric {
            ErrorMetric::AbsRel => &mut self.abs_rel,
            ErrorMetric::SqRel => &mut self.sq_rel,
            ErrorMetric::Rmse => &mut self.rmse,
            ErrorMetric::RmseLog => &mut self.rmse_log,
        }
    }
}

pub fn is_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_RELATIVE_TOLERANCE * a.abs().max(b.abs()) + TIE_ABSOLUTE_TOLERANCE
}

/// Metrics of one frame under a given scale factor.
pub fn metrics_at_scale(
    frame: &Frame,
    scale: f64,
    cfg: &EvalConfig,
) -> Result<DepthMetrics, EvalError> {
    let pred = frame.depth.scaled(scale, DepthKind::Absolute);
    compute_metrics(&pred, &frame.gt, cfg)
}

/// Scores every frame under both scale estimates and counts, per error
/// metric, which estimate did better.
pub fn compare_estimators(frames: &[Frame], dgc: &DgcConfig, eval: &EvalConfig) -> Comparison {
    let mut out = Comparison {
        frames: Vec::with_capacity(frames.len()),
        abs_rel: MetricTally::default(),
        sq_rel: MetricTally::default(),
        rmse: MetricTally::default(),
        rmse_log: MetricTally::default(),
    };
    for frame in frames {
        let s = frame_scales(frame, dgc, eval);
        let dgc_m = s.dgc.ok().and_then(|f| metrics_at_scale(frame, f, eval).ok());
        let gt_m = s.gt.ok().and_then(|f| metrics_at_scale(frame, f, eval).ok());
        let status = match (&s.dgc, &s.gt) {
            (Err(e), _) | (_, Err(e)) => *e,
            _ if gt_m.is_none() => FrameStatus::GtError,
            _ if dgc_m.is_none() => FrameStatus::DgcError,
            _ => FrameStatus::Ok,
        };
        if let (Some(d), Some(g)) = (&dgc_m, &gt_m) {
            for metric in ErrorMetric::ALL {
                let (a, b) = (d.get(metric), g.get(metric));
                let t = out.tally_mut(metric);
                if is_tie(a, b) {
                    t.ties += 1;
                } else if a < b {
                    t.dgc_better += 1;
                } else {
                    t.gt_better += 1;
                }
            }
        }
        out.frames.push(FrameComparison {
            frame: frame.id.clone(),
            status,
            dgc: dgc_m,
            gt: gt_m,
        });
    }
    out
}
