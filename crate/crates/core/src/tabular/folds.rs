//! Stratified k-fold assignment.
//!
//! Rows are grouped by target class, each group is shuffled, and a single
//! fold cursor deals rows round-robin across groups. Dealing within a class
//! is consecutive, so per-class fold counts differ by at most one; the cursor
//! carries across classes, so total fold sizes also differ by at most one.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tabular::{Cell, Dataset};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    fold_of_row: Vec<usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_rows(&self) -> usize {
        self.fold_of_row.len()
    }

    pub fn fold_of(&self, row: usize) -> usize {
        self.fold_of_row[row]
    }

    /// Rows held out in `fold`, ascending.
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.fold_of_row[r] == fold).collect()
    }

    /// Rows outside `fold`, ascending.
    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.fold_of_row[r] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.fold_of_row {
            sizes[f] += 1;
        }
        sizes
    }

    /// Two-column audit export: row_index, fold_id.
    pub fn export_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "row_index,fold_id")?;
        for (row, fold) in self.fold_of_row.iter().enumerate() {
            writeln!(out, "{row},{fold}")?;
        }
        Ok(())
    }
}

// Total order over finite f64 bit patterns, for grouping continuous targets.
fn order_key(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Deterministic stratified assignment of rows to `k` folds.
///
/// Stratification keys off the target column; rows with a missing target form
/// their own stratum. Identical (data, k, seed) always produce the same
/// assignment.
pub fn stratified_kfold(data: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Folds(format!("k must be at least 2, got {k}")));
    }
    if k > data.n_rows() {
        return Err(Error::Folds(format!(
            "k = {k} exceeds the {} available rows",
            data.n_rows()
        )));
    }

    let target = data.target_col();
    let mut groups: std::collections::BTreeMap<Option<u64>, Vec<usize>> = Default::default();
    for r in 0..data.n_rows() {
        let key = data.cell(r, target).map(|cell| match cell {
            Cell::Cat(code) => code as u64,
            Cell::Num(v) => order_key(v),
        });
        groups.entry(key).or_default().push(r);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of_row = vec![0usize; data.n_rows()];
    let mut cursor = 0usize;
    for (_, mut rows) in groups {
        rows.shuffle(&mut rng);
        for r in rows {
            fold_of_row[r] = cursor % k;
            cursor += 1;
        }
    }
    Ok(FoldAssignment { k, fold_of_row })
}
