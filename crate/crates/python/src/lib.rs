//! Python bindings over the benchmark core: dataset handles, the synthetic
//! suite, amputation, imputation, scoring, window planning, and frontier
//! flags. Thin by design; the heavy conventions live in the core crate.

use std::str::FromStr;

use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;

use impute_bench::amputation::{ampute as ampute_rs, AmputationSpec, Mechanism};
use impute_bench::bench::{column_ranges, nrmse as nrmse_rs, pareto_flags};
use impute_bench::imputers::{impute as impute_rs, ImputerConfig, Method};
use impute_bench::llm::plan_batches;
use impute_bench::synthgen::table1_suite;
use impute_bench::tabular::{apply_mask, load_csv, write_csv, Cell, GroundTruthStore};

fn err(e: impute_bench::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A tabular dataset: named columns, one designated class label, cells that
/// are numeric, categorical, or missing.
#[pyclass(frozen)]
struct Dataset {
    inner: impute_bench::tabular::Dataset,
}

#[pymethods]
impl Dataset {
    /// Reads a CSV with a header row; the last column becomes the target.
    #[staticmethod]
    #[pyo3(signature = (path, name=None))]
    fn load_csv(path: &str, name: Option<&str>) -> PyResult<Dataset> {
        let data = load_csv(path, None).map_err(err)?;
        let data = match name {
            Some(n) => data.renamed(n),
            None => data,
        };
        Ok(Dataset { inner: data })
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        write_csv(&self.inner, file).map_err(err)
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }

    #[getter]
    fn missing_count(&self) -> usize {
        self.inner.missing_count()
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.schema().iter().map(|f| f.name.clone()).collect()
    }

    /// Cell value: float for continuous, label string for categorical,
    /// None for missing.
    fn cell(&self, py: Python<'_>, row: usize, col: usize) -> PyResult<Py<PyAny>> {
        if row >= self.inner.n_rows() || col >= self.inner.n_cols() {
            return Err(PyIndexError::new_err(format!("cell ({row},{col}) out of range")));
        }
        match self.inner.cell(row, col) {
            None => Ok(py.None()),
            Some(Cell::Num(v)) => Ok(v.into_pyobject(py)?.into_any().unbind()),
            Some(Cell::Cat(code)) => {
                let label = self
                    .inner
                    .feature(col)
                    .categories()
                    .and_then(|cats| cats.get(code as usize))
                    .ok_or_else(|| {
                        PyValueError::new_err(format!("column {col} has no label for code {code}"))
                    })?;
                Ok(label.into_pyobject(py)?.into_any().unbind())
            }
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name='{}', rows={}, cols={}, missing={})",
            self.inner.name(),
            self.inner.n_rows(),
            self.inner.n_cols(),
            self.inner.missing_count()
        )
    }
}

/// The held-out values removed by an amputation, keyed by cell.
#[pyclass(frozen)]
struct GroundTruth {
    inner: GroundTruthStore,
}

#[pymethods]
impl GroundTruth {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Masked cell coordinates, row-major.
    fn cells(&self) -> Vec<(usize, usize)> {
        self.inner.iter().map(|(r, c, _)| (r, c)).collect()
    }
}

/// Regenerates the built-in synthetic benchmark suite for a master seed.
#[pyfunction]
fn synthetic_suite(master_seed: u64) -> PyResult<Vec<Dataset>> {
    let suite = table1_suite(master_seed).map_err(err)?;
    Ok(suite.into_iter().map(|inner| Dataset { inner }).collect())
}

/// Removes observed cells under "MCAR", "MAR", or "MNAR" at the given rate.
/// Returns the punctured dataset and its ground truth.
#[pyfunction]
fn ampute(data: &Dataset, mechanism: &str, rate: f64, seed: u64) -> PyResult<(Dataset, GroundTruth)> {
    let mechanism = Mechanism::from_str(mechanism).map_err(err)?;
    let outcome = ampute_rs(&data.inner, &AmputationSpec::new(mechanism, rate, seed)).map_err(err)?;
    let (punctured, truth) = apply_mask(&data.inner, &outcome.mask).map_err(err)?;
    Ok((Dataset { inner: punctured }, GroundTruth { inner: truth }))
}

/// Fits one classical imputer ("mean", "knn", "mice", "softimpute",
/// "missforest") on the train partition and completes both partitions.
#[pyfunction]
#[pyo3(signature = (train, test, method, seed=0))]
fn impute(train: &Dataset, test: &Dataset, method: &str, seed: u64) -> PyResult<(Dataset, Dataset)> {
    let method = Method::from_str(method).map_err(err)?;
    let cfg = ImputerConfig::new(method, seed);
    let (train_res, test_res) = impute_rs(&train.inner, &test.inner, &cfg).map_err(err)?;
    Ok((Dataset { inner: train_res.completed }, Dataset { inner: test_res.completed }))
}

/// Range-normalized RMSE of the completed dataset against the held-out
/// truth, with per-feature ranges taken from `reference`.
#[pyfunction]
fn nrmse(truth: &GroundTruth, completed: &Dataset, reference: &Dataset) -> PyResult<f64> {
    let ranges = column_ranges(&reference.inner);
    nrmse_rs(&truth.inner, &completed.inner, &ranges).map_err(err)
}

/// Prompt windows tiling a partition of `n_rows` x `n_features`, as
/// (row_start, row_end, col_start, col_end) half-open ranges.
#[pyfunction]
fn plan_windows(n_rows: usize, n_features: usize) -> Vec<(usize, usize, usize, usize)> {
    plan_batches(n_rows, n_features)
        .windows
        .iter()
        .map(|w| (w.row_start, w.row_end, w.col_start, w.col_end))
        .collect()
}

/// Non-dominated flags for (error, runtime) points; smaller is better on
/// both axes.
#[pyfunction]
fn pareto_frontier(points: Vec<(f64, f64)>) -> Vec<bool> {
    pareto_flags(&points)
}

#[pymodule]
fn impute_bench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<GroundTruth>()?;
    m.add_function(wrap_pyfunction!(synthetic_suite, m)?)?;
    m.add_function(wrap_pyfunction!(ampute, m)?)?;
    m.add_function(wrap_pyfunction!(impute, m)?)?;
    m.add_function(wrap_pyfunction!(nrmse, m)?)?;
    m.add_function(wrap_pyfunction!(plan_windows, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_frontier, m)?)?;
    Ok(())
}
