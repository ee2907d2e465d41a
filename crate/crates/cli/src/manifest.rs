//! Frame manifests for `sweep` and `compare`.
//!
//! A CSV file with header `frame,depth,intrinsics,camera_height,gt`. Paths
//! are relative to the manifest's directory. An empty file is an empty
//! manifest.

use std::path::{Path, PathBuf};

use dgc_core::evaluation::Frame;
use dgc_core::DepthKind;
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::formats::{read_depth, read_intrinsics};

pub const COLUMNS: [&str; 5] = ["frame", "depth", "intrinsics", "camera_height", "gt"];

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ManifestRow {
    pub frame: String,
    pub depth: PathBuf,
    pub intrinsics: PathBuf,
    pub camera_height: f64,
    pub gt: PathBuf,
}

impl ManifestRow {
    /// Reads every file the row names. Depth is relative, ground truth metric.
    pub fn load(&self) -> CliResult<Frame> {
        let depth = read_depth(&self.depth, DepthKind::Relative)?;
        let gt = read_depth(&self.gt, DepthKind::Absolute)?;
        let intrinsics = read_intrinsics(&self.intrinsics)?.for_depth(&depth)?;
        if !(self.camera_height.is_finite() && self.camera_height > 0.0) {
            return Err(CliError::Validation(format!(
                "frame {}: camera_height must be positive, got {}",
                self.frame, self.camera_height
            )));
        }
        Ok(Frame {
            id: self.frame.clone(),
            depth,
            intrinsics,
            camera_height: self.camera_height,
            gt,
        })
    }
}

pub fn read_manifest(path: &Path) -> CliResult<Vec<ManifestRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base).map_err(|e| match e {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_manifest(text: &str, base: &Path) -> CliResult<Vec<ManifestRow>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Validation(format!("manifest header: {e}")))?
        .clone();
    for col in COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(CliError::Validation(format!("manifest is missing column '{col}'")));
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<ManifestRow>().enumerate() {
        let mut row =
            record.map_err(|e| CliError::Validation(format!("manifest row {}: {e}", i + 1)))?;
        for p in [&mut row.depth, &mut row.intrinsics, &mut row.gt] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
