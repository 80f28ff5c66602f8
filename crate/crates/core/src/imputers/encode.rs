//! Label-encoded numeric view of the non-target feature columns, shared by
//! the matrix-based imputers.

use nalgebra::DMatrix;

use crate::tabular::{Cell, Dataset};

/// Row-major missing flags plus an n x p value matrix over the non-target
/// columns. Missing entries hold NaN until an imputer initializes them.
pub(crate) struct FeatureMatrix {
    /// Dataset column index per matrix column, ascending.
    pub cols: Vec<usize>,
    pub values: DMatrix<f64>,
    missing: Vec<bool>,
}

impl FeatureMatrix {
    pub fn from_dataset(data: &Dataset) -> Self {
        let cols = data.feature_cols();
        let n = data.n_rows();
        let p = cols.len();
        let mut values = DMatrix::from_element(n, p, f64::NAN);
        let mut missing = vec![false; n * p];
        for (j, &c) in cols.iter().enumerate() {
            for r in 0..n {
                match data.cell(r, c) {
                    Some(v) => values[(r, j)] = v.encoded(),
                    None => missing[r * p + j] = true,
                }
            }
        }
        FeatureMatrix { cols, values, missing }
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_missing(&self, r: usize, j: usize) -> bool {
        self.missing[r * self.n_cols() + j]
    }

    pub fn missing_in_col(&self, j: usize) -> usize {
        (0..self.n_rows()).filter(|&r| self.is_missing(r, j)).count()
    }

    pub fn missing_cells(&self) -> Vec<(usize, usize)> {
        let p = self.n_cols();
        self.missing
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| (i / p, i % p))
            .collect()
    }

    pub fn observed_mean(&self, j: usize) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for r in 0..self.n_rows() {
            if !self.is_missing(r, j) {
                sum += self.values[(r, j)];
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// Most frequent observed value; ties resolve to the smallest value.
    /// Meaningful for label-code columns, where values are small integers.
    pub fn observed_mode(&self, j: usize) -> Option<f64> {
        let mut seen: Vec<(f64, usize)> = Vec::new();
        for r in 0..self.n_rows() {
            if !self.is_missing(r, j) {
                let v = self.values[(r, j)];
                match seen.iter_mut().find(|(val, _)| *val == v) {
                    Some((_, count)) => *count += 1,
                    None => seen.push((v, 1)),
                }
            }
        }
        seen.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.total_cmp(&b.0)));
        seen.first().map(|&(v, _)| v)
    }

    /// Replaces every missing entry with `init[j]`.
    pub fn fill_missing(&mut self, init: &[f64]) {
        for r in 0..self.n_rows() {
            for j in 0..self.n_cols() {
                if self.is_missing(r, j) {
                    self.values[(r, j)] = init[j];
                }
            }
        }
    }
}

/// Decodes a matrix value for a dataset column: continuous values pass
/// through, categorical values round to the nearest valid code.
pub(crate) fn decode_value(data: &Dataset, col: usize, v: f64) -> Cell {
    match data.feature(col).categories() {
        Some(cats) => {
            let top = (cats.len() - 1) as f64;
            Cell::Cat(v.round().clamp(0.0, top) as u32)
        }
        None => Cell::Num(v),
    }
}

/// Copies the matrix values of originally-missing cells back into a clone of
/// `input`; observed cells keep their original bit patterns.
pub(crate) fn complete_from_matrix(input: &Dataset, fm: &FeatureMatrix) -> Dataset {
    let mut out = input.clone();
    for (r, j) in fm.missing_cells() {
        let col = fm.cols[j];
        out.set_cell(r, col, Some(decode_value(input, col, fm.values[(r, j)])));
    }
    out
}
