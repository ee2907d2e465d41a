use serde::{Deserialize, Serialize};

use crate::grid::Grid;

/// Whether depth values are metric or known only up to a positive scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthKind {
    Relative,
    Absolute,
}

/// A depth raster. Pixels without a usable depth are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    values: Grid<Option<f64>>,
    kind: DepthKind,
}

#[inline]
fn usable(v: f64) -> Option<f64> {
    (v.is_finite() && v > 0.0).then_some(v)
}

impl DepthMap {
    /// Builds a map from raw values. Non-finite and non-positive values
    /// become invalid pixels instead of failing the whole map.
    pub fn from_raw(width: usize, height: usize, raw: Vec<f64>, kind: DepthKind) -> Self {
        let values = raw.into_iter().map(usable).collect();
        Self {
            values: Grid::from_vec(width, height, values),
            kind,
        }
    }

    /// Invalid pixels are re-checked, so `Some(-1.0)` ends up `None`.
    pub fn from_grid(grid: Grid<Option<f64>>, kind: DepthKind) -> Self {
        let values = grid.map(|v| v.and_then(usable));
        Self { values, kind }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        kind: DepthKind,
        f: impl FnMut(usize, usize) -> Option<f64>,
    ) -> Self {
        Self::from_grid(Grid::from_fn(width, height, f), kind)
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    /// `(width, height)`
    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    pub fn kind(&self) -> DepthKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        *self.values.get(row, col)
    }

    pub fn grid(&self) -> &Grid<Option<f64>> {
        &self.values
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Raw values with invalid pixels written as `0.0`.
    pub fn to_raw(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.unwrap_or(0.0)).collect()
    }

    /// Multiplies every valid pixel by `factor` and retags the kind.
    pub fn scaled(&self, factor: f64, kind: DepthKind) -> Self {
        Self::from_grid(self.values.map(|v| v.map(|d| d * factor)), kind)
    }

    pub fn with_kind(mut self, kind: DepthKind) -> Self {
        self.kind = kind;
        self
    }

    /// Pixelwise transform of valid values; results are re-validated.
    pub fn map_valid(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let w = self.width();
        let data = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, v)| v.map(|d| f(idx / w, idx % w, d)))
            .collect();
        Self::from_grid(Grid::from_vec(w, self.height(), data), self.kind)
    }
}
