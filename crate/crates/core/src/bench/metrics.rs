//! Range-normalized imputation error.
//!
//! Per feature, the root mean square residual over that feature's masked
//! cells is divided by the feature's value range; the dataset score is the
//! unweighted mean over features that had masked cells. Categorical cells
//! are compared on their label codes.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tabular::{ColumnRange, Dataset, GroundTruthStore};

/// Observed per-column extrema used as scoring denominators: raw values for
/// continuous columns, label codes for categorical ones. `None` marks a
/// column with no observed cells.
pub fn column_ranges(data: &Dataset) -> Vec<Option<ColumnRange>> {
    (0..data.n_cols())
        .map(|c| {
            let mut range: Option<ColumnRange> = None;
            for (_, cell) in data.observed_in_col(c) {
                let v = cell.encoded();
                range = Some(match range {
                    None => ColumnRange { min: v, max: v },
                    Some(r) => ColumnRange { min: r.min.min(v), max: r.max.max(v) },
                });
            }
            range
        })
        .collect()
}

/// Scores `completed` against the held-out truth. Every truth cell must be
/// filled in `completed`, and every scored feature needs a non-degenerate
/// range; a constant range is an error so the caller can flag and exclude
/// the record rather than divide by zero.
pub fn nrmse(
    truth: &GroundTruthStore,
    completed: &Dataset,
    ranges: &[Option<ColumnRange>],
) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Metric("no masked cells to score".into()));
    }
    let mut per_col: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (r, c, want) in truth.iter() {
        let got = completed
            .cell(r, c)
            .ok_or_else(|| Error::Metric(format!("cell ({r},{c}) was left unimputed")))?;
        let d = got.encoded() - want.encoded();
        let entry = per_col.entry(c).or_insert((0.0, 0));
        entry.0 += d * d;
        entry.1 += 1;
    }
    let mut total = 0.0;
    for (&c, &(sum_sq, n)) in &per_col {
        let range = ranges.get(c).copied().flatten().ok_or_else(|| {
            Error::Metric(format!("no range available for scored column {c}"))
        })?;
        if !(range.width() > 0.0) {
            return Err(Error::Metric(format!(
                "degenerate range on column {c} (min = max = {})",
                range.min
            )));
        }
        total += (sum_sq / n as f64).sqrt() / range.width();
    }
    Ok(total / per_col.len() as f64)
}
