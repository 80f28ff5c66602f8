//! k-nearest-neighbor imputation.
//!
//! Distance between two partially observed rows is the root mean squared
//! gap over their co-observed feature dimensions (label-encoded), so rows
//! with different observation patterns stay comparable. The neighbor pool
//! for a cell is the set of train rows observing that cell's column; ties
//! order by (distance, train row index). Neighbor values are aggregated in
//! ascending row order, which pins the floating-point summation order for
//! oracle comparisons.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::imputers::{
    column_statistics, finalize, precheck, CellProvenance, ImputationResult, ImputerConfig,
};
use crate::tabular::{Cell, Dataset};

fn encode_rows(data: &Dataset, cols: &[usize]) -> Vec<Vec<Option<f64>>> {
    (0..data.n_rows())
        .map(|r| cols.iter().map(|&c| data.cell(r, c).map(Cell::encoded)).collect())
        .collect()
}

/// Scaled Euclidean distance over co-observed dimensions; `None` when the
/// rows share no observed dimension.
fn distance(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let mut sum = 0.0;
    let mut co = 0usize;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            sum += (x - y) * (x - y);
            co += 1;
        }
    }
    (co > 0).then(|| (sum / co as f64).sqrt())
}

fn aggregate(train: &Dataset, col: usize, mut neighbors: Vec<usize>) -> Cell {
    neighbors.sort_unstable();
    if train.feature(col).is_categorical() {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &t in &neighbors {
            let code = train.cell(t, col).expect("pool rows observe the column").as_cat().unwrap();
            *counts.entry(code).or_insert(0) += 1;
        }
        let (&code, _) = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).unwrap();
        Cell::Cat(code)
    } else {
        let mut sum = 0.0;
        for &t in &neighbors {
            sum += train.cell(t, col).expect("pool rows observe the column").encoded();
        }
        Cell::Num(sum / neighbors.len() as f64)
    }
}

pub fn impute_knn(
    train: &Dataset,
    test: &Dataset,
    cfg: &ImputerConfig,
) -> Result<(ImputationResult, ImputationResult)> {
    precheck(train, test, cfg)?;
    if cfg.k > train.n_rows() {
        return Err(Error::Impute(format!(
            "k = {} exceeds the {} train rows",
            cfg.k,
            train.n_rows()
        )));
    }

    let fit_start = Instant::now();
    let cols = train.feature_cols();
    let train_enc = encode_rows(train, &cols);
    let stats = column_statistics(train);
    let fit_runtime = fit_start.elapsed().as_secs_f64();

    let train_result = fill(train, train, &train_enc, &train_enc, &cols, &stats, cfg.k, fit_runtime)?;
    let test_enc = encode_rows(test, &cols);
    let test_result = fill(test, train, &train_enc, &test_enc, &cols, &stats, cfg.k, 0.0)?;
    Ok((train_result, test_result))
}

#[allow(clippy::too_many_arguments)]
fn fill(
    query: &Dataset,
    train: &Dataset,
    train_enc: &[Vec<Option<f64>>],
    query_enc: &[Vec<Option<f64>>],
    cols: &[usize],
    stats: &[Option<Cell>],
    k: usize,
    fit_runtime: f64,
) -> Result<ImputationResult> {
    let start = Instant::now();
    let mut completed = query.clone();
    let mut provenance = BTreeMap::new();
    for r in 0..query.n_rows() {
        for (j, &c) in cols.iter().enumerate() {
            if !query.is_missing(r, c) {
                continue;
            }
            let mut candidates: Vec<(f64, usize)> = (0..train.n_rows())
                .filter(|&t| train_enc[t][j].is_some())
                .filter_map(|t| distance(&query_enc[r], &train_enc[t]).map(|d| (d, t)))
                .collect();
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if candidates.is_empty() {
                completed.set_cell(r, c, Some(stats[c].expect("train column observed")));
                provenance.insert((r, c), CellProvenance::Fallback);
            } else {
                let neighbors = candidates.iter().take(k).map(|&(_, t)| t).collect();
                completed.set_cell(r, c, Some(aggregate(train, c, neighbors)));
                provenance.insert((r, c), CellProvenance::Model);
            }
        }
    }
    finalize(query, completed, provenance, fit_runtime, start.elapsed().as_secs_f64())
}
