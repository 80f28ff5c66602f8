//! Missing-value masks and the ground-truth store that makes amputation
//! reversible for scoring.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tabular::{Cell, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskOrigin {
    /// Missingness present in the source data.
    Natural,
    /// Missingness introduced by an amputation mechanism.
    Amputated,
}

/// Boolean grid congruent with a dataset; true marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingMask {
    n_rows: usize,
    n_cols: usize,
    origin: MaskOrigin,
    bits: Vec<bool>,
}

impl MissingMask {
    pub fn new(n_rows: usize, n_cols: usize, origin: MaskOrigin) -> Self {
        MissingMask { n_rows, n_cols, origin, bits: vec![false; n_rows * n_cols] }
    }

    /// Natural-missingness mask of a dataset.
    pub fn of_dataset(data: &Dataset) -> Self {
        let mut mask = MissingMask::new(data.n_rows(), data.n_cols(), MaskOrigin::Natural);
        for r in 0..data.n_rows() {
            for c in 0..data.n_cols() {
                if data.is_missing(r, c) {
                    mask.bits[r * mask.n_cols + c] = true;
                }
            }
        }
        mask
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn origin(&self) -> MaskOrigin {
        self.origin
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.bits[row * self.n_cols + col]
    }

    /// Marks one cell missing. Setting an already set cell is a no-op.
    pub fn set(&mut self, row: usize, col: usize) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.bits[row * self.n_cols + col] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn count_in_col(&self, col: usize) -> usize {
        (0..self.n_rows).filter(|&r| self.is_missing(r, col)).count()
    }

    /// Set bits in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n_cols = self.n_cols;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / n_cols, i % n_cols))
    }
}

/// Original values of amputated cells, keyed by (row, column). The key set
/// always equals the applied mask's set bits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruthStore {
    entries: BTreeMap<(usize, usize), Cell>,
}

impl GroundTruthStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn insert(&mut self, row: usize, col: usize, value: Cell) {
        self.entries.insert((row, col), value);
    }

    pub fn get(&self, row: usize, col: usize) -> Option<Cell> {
        self.entries.get(&(row, col)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in row-major key order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Cell)> + '_ {
        self.entries.iter().map(|(&(r, c), &v)| (r, c, v))
    }
}

/// Removes the masked cells from `data`, returning the punctured dataset and
/// the removed values. `data` itself is untouched.
///
/// Every masked cell must currently be observed (amputation targets observed
/// cells only) and must not sit in the target column.
pub fn apply_mask(data: &Dataset, mask: &MissingMask) -> Result<(Dataset, GroundTruthStore)> {
    if mask.n_rows() != data.n_rows() || mask.n_cols() != data.n_cols() {
        return Err(Error::Schema(format!(
            "mask is {}x{}, dataset is {}x{}",
            mask.n_rows(),
            mask.n_cols(),
            data.n_rows(),
            data.n_cols()
        )));
    }
    let target = data.target_col();
    let mut out = data.clone();
    let mut store = GroundTruthStore::new();
    for (r, c) in mask.iter_set() {
        if c == target {
            return Err(Error::Amputation(format!("mask covers target column at row {r}")));
        }
        match data.cell(r, c) {
            Some(value) => {
                store.insert(r, c, value);
                out.set_cell(r, c, None);
            }
            None => {
                return Err(Error::Amputation(format!(
                    "mask overlaps an already-missing cell at row {r}, column {c}"
                )));
            }
        }
    }
    Ok((out, store))
}

impl Dataset {
    /// Writes stored ground-truth values back into their cells. Inverse of
    /// `apply_mask` for the mask that produced `store`.
    pub fn with_cells_restored(&self, store: &GroundTruthStore) -> Dataset {
        let mut out = self.clone();
        for (r, c, v) in store.iter() {
            out.set_cell(r, c, Some(v));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::FeatureSchema;

    fn sample() -> Dataset {
        Dataset::from_rows(
            "toy",
            vec![
                FeatureSchema::continuous("a"),
                FeatureSchema::continuous("b"),
                FeatureSchema::categorical("t", vec!["x".into(), "y".into()]).into_target(),
            ],
            vec![
                vec![Some(Cell::Num(1.0)), Some(Cell::Num(10.0)), Some(Cell::Cat(0))],
                vec![Some(Cell::Num(2.0)), Some(Cell::Num(20.0)), Some(Cell::Cat(1))],
                vec![Some(Cell::Num(3.0)), None, Some(Cell::Cat(0))],
            ],
        )
        .unwrap()
    }

    #[test]
    fn empty_mask_is_identity() {
        let data = sample();
        let mask = MissingMask::new(3, 3, MaskOrigin::Amputated);
        let (out, store) = apply_mask(&data, &mask).unwrap();
        assert_eq!(out, data);
        assert!(store.is_empty());
    }

    #[test]
    fn single_cell_mask_records_prior_value() {
        let data = sample();
        let mut mask = MissingMask::new(3, 3, MaskOrigin::Amputated);
        mask.set(1, 0);
        let (out, store) = apply_mask(&data, &mask).unwrap();
        assert!(out.is_missing(1, 0));
        assert_eq!(store.len(), 1);
        assert_eq!(store.get(1, 0), Some(Cell::Num(2.0)));
        assert_eq!(data.cell(1, 0), Some(Cell::Num(2.0)), "input untouched");
    }

    #[test]
    fn masking_missing_cell_is_overlap_error() {
        let data = sample();
        let mut mask = MissingMask::new(3, 3, MaskOrigin::Amputated);
        mask.set(2, 1);
        assert!(matches!(apply_mask(&data, &mask), Err(Error::Amputation(_))));
    }

    #[test]
    fn masking_target_column_is_rejected() {
        let data = sample();
        let mut mask = MissingMask::new(3, 3, MaskOrigin::Amputated);
        mask.set(0, 2);
        assert!(matches!(apply_mask(&data, &mask), Err(Error::Amputation(_))));
    }

    #[test]
    fn restore_round_trips() {
        let data = sample();
        let mut mask = MissingMask::new(3, 3, MaskOrigin::Amputated);
        mask.set(0, 0);
        mask.set(1, 1);
        let (punctured, store) = apply_mask(&data, &mask).unwrap();
        assert_eq!(punctured.with_cells_restored(&store), data);
    }

    #[test]
    fn natural_mask_matches_dataset() {
        let data = sample();
        let mask = MissingMask::of_dataset(&data);
        assert_eq!(mask.origin(), MaskOrigin::Natural);
        assert_eq!(mask.count(), 1);
        assert!(mask.is_missing(2, 1));
        assert_eq!(mask.iter_set().collect::<Vec<_>>(), vec![(2, 1)]);
    }
}
