//! Mean/mode imputation. Continuous cells take the train-column mean,
//! categorical cells the train-column mode; the test partition reuses train
//! statistics.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::error::Result;
use crate::imputers::{
    column_statistics, finalize, precheck, CellProvenance, ImputationResult, ImputerConfig,
};
use crate::tabular::{Cell, Dataset};

pub fn impute_mean(
    train: &Dataset,
    test: &Dataset,
    cfg: &ImputerConfig,
) -> Result<(ImputationResult, ImputationResult)> {
    precheck(train, test, cfg)?;
    let fit_start = Instant::now();
    let stats = column_statistics(train);
    let fit_runtime = fit_start.elapsed().as_secs_f64();

    let train_result = fill(train, &stats, fit_runtime)?;
    let test_result = fill(test, &stats, 0.0)?;
    Ok((train_result, test_result))
}

fn fill(data: &Dataset, stats: &[Option<Cell>], fit_runtime: f64) -> Result<ImputationResult> {
    let start = Instant::now();
    let mut completed = data.clone();
    let mut provenance = BTreeMap::new();
    for c in data.feature_cols() {
        // precheck guarantees a train statistic for every feature column.
        let stat = stats[c].expect("train column observed at least once");
        for r in 0..data.n_rows() {
            if data.is_missing(r, c) {
                completed.set_cell(r, c, Some(stat));
                provenance.insert((r, c), CellProvenance::Model);
            }
        }
    }
    finalize(data, completed, provenance, fit_runtime, start.elapsed().as_secs_f64())
}
