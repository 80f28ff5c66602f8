//! Chained-equation imputation.
//!
//! Missing cells start at train-column means; then, cycling over columns in
//! ascending index order, each incomplete column is regressed on all other
//! feature columns (least squares with ridge damping 1e-6 on the normal
//! equations) over its originally-observed train rows, and its missing cells
//! are overwritten with predictions. Sweeps stop when the largest absolute
//! change of any imputed cell falls below the tolerance. Test cells are
//! mean-initialized with train means and refined with the frozen final train
//! regressors under the same stopping rule.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::imputers::encode::complete_from_matrix;
use crate::imputers::{
    finalize, precheck, CellProvenance, FeatureMatrix, ImputationResult, ImputerConfig,
};
use crate::tabular::Dataset;

const RIDGE_DAMPING: f64 = 1e-6;

enum ColumnModel {
    /// Weights over the other feature columns in ascending order, then the
    /// intercept.
    Linear(Vec<f64>),
    /// Singular-design fallback.
    Mean(f64),
}

impl ColumnModel {
    fn predict(&self, fm: &FeatureMatrix, row: usize, col: usize) -> f64 {
        match self {
            ColumnModel::Mean(m) => *m,
            ColumnModel::Linear(w) => {
                let mut acc = 0.0;
                let mut idx = 0;
                for j in 0..fm.n_cols() {
                    if j != col {
                        acc += w[idx] * fm.values[(row, j)];
                        idx += 1;
                    }
                }
                acc + w[idx]
            }
        }
    }

    fn is_fallback(&self) -> bool {
        matches!(self, ColumnModel::Mean(_))
    }
}

fn fit_column(fm: &FeatureMatrix, col: usize, mean: f64) -> ColumnModel {
    let rows: Vec<usize> = (0..fm.n_rows()).filter(|&r| !fm.is_missing(r, col)).collect();
    let p = fm.n_cols(); // p-1 regressors plus intercept
    let mut design = DMatrix::zeros(rows.len(), p);
    let mut y = DVector::zeros(rows.len());
    for (i, &r) in rows.iter().enumerate() {
        let mut idx = 0;
        for j in 0..fm.n_cols() {
            if j != col {
                design[(i, idx)] = fm.values[(r, j)];
                idx += 1;
            }
        }
        design[(i, idx)] = 1.0;
        y[i] = fm.values[(r, col)];
    }
    let mut ata = design.transpose() * &design;
    for d in 0..p {
        ata[(d, d)] += RIDGE_DAMPING;
    }
    let aty = design.transpose() * y;
    match ata.cholesky() {
        Some(chol) => ColumnModel::Linear(chol.solve(&aty).iter().copied().collect()),
        None => ColumnModel::Mean(mean),
    }
}

/// One prediction sweep over `cols`, overwriting missing cells in place.
/// Returns the largest absolute cell change.
fn sweep(fm: &mut FeatureMatrix, cols: &[usize], models: &BTreeMap<usize, ColumnModel>) -> f64 {
    let mut max_change = 0.0f64;
    for &j in cols {
        let model = &models[&j];
        for r in 0..fm.n_rows() {
            if fm.is_missing(r, j) {
                let new = model.predict(fm, r, j);
                max_change = max_change.max((new - fm.values[(r, j)]).abs());
                fm.values[(r, j)] = new;
            }
        }
    }
    max_change
}

pub fn impute_mice(
    train: &Dataset,
    test: &Dataset,
    cfg: &ImputerConfig,
) -> Result<(ImputationResult, ImputationResult)> {
    mice_with_trace(train, test, cfg).map(|(results, _)| results)
}

pub(crate) fn mice_with_trace(
    train: &Dataset,
    test: &Dataset,
    cfg: &ImputerConfig,
) -> Result<((ImputationResult, ImputationResult), Vec<f64>)> {
    precheck(train, test, cfg)?;
    let fit_start = Instant::now();

    let mut fm_train = FeatureMatrix::from_dataset(train);
    let fm_test_probe = FeatureMatrix::from_dataset(test);
    let means: Vec<f64> = (0..fm_train.n_cols())
        .map(|j| fm_train.observed_mean(j).expect("precheck: train column observed"))
        .collect();
    fm_train.fill_missing(&means);

    // Columns needing a regressor: missing anywhere in train or test.
    let regress_cols: Vec<usize> = (0..fm_train.n_cols())
        .filter(|&j| fm_train.missing_in_col(j) > 0 || fm_test_probe.missing_in_col(j) > 0)
        .collect();

    let mut models: BTreeMap<usize, ColumnModel> = BTreeMap::new();
    let mut trace = Vec::new();
    for _ in 0..cfg.max_iterations {
        for &j in &regress_cols {
            models.insert(j, fit_column(&fm_train, j, means[j]));
        }
        let max_change = sweep(&mut fm_train, &regress_cols, &models);
        trace.push(max_change);
        if max_change < cfg.convergence_tol {
            break;
        }
    }
    let fit_runtime = fit_start.elapsed().as_secs_f64();

    let fallback_cols: Vec<usize> = regress_cols
        .iter()
        .copied()
        .filter(|j| models[j].is_fallback())
        .collect();

    let train_result = {
        let start = Instant::now();
        let completed = complete_from_matrix(train, &fm_train);
        let provenance = provenance_for(&fm_train, &fallback_cols);
        finalize(train, completed, provenance, fit_runtime, start.elapsed().as_secs_f64())?
    };

    let test_result = {
        let start = Instant::now();
        let mut fm_test = fm_test_probe;
        fm_test.fill_missing(&means);
        for _ in 0..cfg.max_iterations {
            if sweep(&mut fm_test, &regress_cols, &models) < cfg.convergence_tol {
                break;
            }
        }
        let completed = complete_from_matrix(test, &fm_test);
        let provenance = provenance_for(&fm_test, &fallback_cols);
        finalize(test, completed, provenance, 0.0, start.elapsed().as_secs_f64())?
    };

    Ok(((train_result, test_result), trace))
}

fn provenance_for(
    fm: &FeatureMatrix,
    fallback_cols: &[usize],
) -> BTreeMap<(usize, usize), CellProvenance> {
    fm.missing_cells()
        .into_iter()
        .map(|(r, j)| {
            let tag = if fallback_cols.contains(&j) {
                CellProvenance::Fallback
            } else {
                CellProvenance::Model
            };
            ((r, fm.cols[j]), tag)
        })
        .collect()
}
