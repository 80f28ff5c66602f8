//! Unit-interval scaling fitted on a training partition and reused verbatim
//! on the test partition, so test values outside the train range map outside
//! [0,1] rather than leaking test statistics.

use crate::error::{Error, Result};
use crate::tabular::{Cell, DataScale, Dataset, FeatureKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    pub fn is_constant(&self) -> bool {
        self.min == self.max
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

/// Per-column (min, max) of the continuous columns; `None` for categorical
/// columns, which are never scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationParams {
    ranges: Vec<Option<ColumnRange>>,
}

impl NormalizationParams {
    pub fn n_cols(&self) -> usize {
        self.ranges.len()
    }

    pub fn range(&self, col: usize) -> Option<ColumnRange> {
        self.ranges[col]
    }
}

/// Computes per-column extrema over the observed cells of the selected rows.
/// Every continuous column must be observed in at least one selected row.
pub fn fit_normalizer(data: &Dataset, rows: &[usize]) -> Result<NormalizationParams> {
    if rows.is_empty() {
        return Err(Error::Normalization("no rows selected".into()));
    }
    let mut ranges = Vec::with_capacity(data.n_cols());
    for (c, feat) in data.schema().iter().enumerate() {
        match feat.kind {
            FeatureKind::Categorical(_) => ranges.push(None),
            FeatureKind::Continuous => {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                let mut seen = false;
                for &r in rows {
                    if let Some(Cell::Num(v)) = data.cell(r, c) {
                        min = min.min(v);
                        max = max.max(v);
                        seen = true;
                    }
                }
                if !seen {
                    return Err(Error::Normalization(format!(
                        "column '{}' has no observed values in the selected rows",
                        feat.name
                    )));
                }
                ranges.push(Some(ColumnRange { min, max }));
            }
        }
    }
    Ok(NormalizationParams { ranges })
}

/// Applies the fitted affine map x -> (x - min)/(max - min) to every
/// continuous cell. Constant columns map to 0.0; categorical and missing
/// cells pass through. The result is tagged `DataScale::Unit`.
pub fn apply_normalizer(data: &Dataset, params: &NormalizationParams) -> Result<Dataset> {
    if params.n_cols() != data.n_cols() {
        return Err(Error::Normalization(format!(
            "params cover {} columns, dataset has {}",
            params.n_cols(),
            data.n_cols()
        )));
    }
    let mut out = data.clone();
    for (c, feat) in data.schema().iter().enumerate() {
        if feat.is_categorical() {
            continue;
        }
        let range = params.range(c).ok_or_else(|| {
            Error::Normalization(format!("no fitted range for continuous column '{}'", feat.name))
        })?;
        for r in 0..data.n_rows() {
            if let Some(Cell::Num(v)) = data.cell(r, c) {
                let scaled = if range.is_constant() { 0.0 } else { (v - range.min) / range.width() };
                out.set_cell(r, c, Some(Cell::Num(scaled)));
            }
        }
    }
    Ok(out.with_scale(DataScale::Unit))
}
