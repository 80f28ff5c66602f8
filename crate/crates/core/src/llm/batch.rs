//! Window planning for prompt-based imputation.

pub const MAX_WINDOW_ROWS: usize = 40;
pub const MAX_WINDOW_COLS: usize = 10;

/// One prompt's worth of cells: a half-open row range over a fold partition
/// and a half-open range over its non-target feature list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchWindow {
    pub row_start: usize,
    pub row_end: usize,
    pub col_start: usize,
    pub col_end: usize,
}

impl BatchWindow {
    pub fn n_rows(&self) -> usize {
        self.row_end - self.row_start
    }

    pub fn n_cols(&self) -> usize {
        self.col_end - self.col_start
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchPlan {
    pub windows: Vec<BatchWindow>,
    pub partition_rows: usize,
    pub n_features: usize,
}

/// Tiles the partition into windows of at most 40 rows by 10 features, row
/// tiles outermost, so the window count is
/// ceil(rows/40) x ceil(features/10). Zero rows or features give an empty
/// plan.
pub fn plan_batches(partition_rows: usize, n_features: usize) -> BatchPlan {
    let mut windows = Vec::new();
    let mut row_start = 0;
    while row_start < partition_rows {
        let row_end = (row_start + MAX_WINDOW_ROWS).min(partition_rows);
        let mut col_start = 0;
        while col_start < n_features {
            let col_end = (col_start + MAX_WINDOW_COLS).min(n_features);
            windows.push(BatchWindow { row_start, row_end, col_start, col_end });
            col_start = col_end;
        }
        row_start = row_end;
    }
    BatchPlan { windows, partition_rows, n_features }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_counts_match_fold_shapes() {
        // (rows, features) -> windows, for the 5-fold test partitions of a
        // handful of classic dataset shapes.
        for (rows, features, want) in
            [(30, 4, 1), (16, 19, 2), (154, 8, 4), (36, 13, 2), (39, 22, 3), (31, 19, 2)]
        {
            assert_eq!(
                plan_batches(rows, features).windows.len(),
                want,
                "{rows}x{features}"
            );
        }
    }

    #[test]
    fn count_law_holds() {
        for rows in [1, 39, 40, 41, 80, 153] {
            for features in [1, 9, 10, 11, 25] {
                let plan = plan_batches(rows, features);
                assert_eq!(plan.windows.len(), rows.div_ceil(40) * features.div_ceil(10));
            }
        }
    }

    #[test]
    fn windows_tile_every_cell_once() {
        let plan = plan_batches(95, 23);
        let mut seen = vec![vec![0u32; 23]; 95];
        for w in &plan.windows {
            assert!(w.n_rows() >= 1 && w.n_rows() <= MAX_WINDOW_ROWS);
            assert!(w.n_cols() >= 1 && w.n_cols() <= MAX_WINDOW_COLS);
            for r in w.row_start..w.row_end {
                for c in w.col_start..w.col_end {
                    seen[r][c] += 1;
                }
            }
        }
        assert!(seen.iter().all(|row| row.iter().all(|&n| n == 1)));
    }

    #[test]
    fn order_is_row_major() {
        let plan = plan_batches(80, 15);
        let starts: Vec<(usize, usize)> =
            plan.windows.iter().map(|w| (w.row_start, w.col_start)).collect();
        assert_eq!(starts, vec![(0, 0), (0, 10), (40, 0), (40, 10)]);
    }

    #[test]
    fn degenerate_shapes_plan_nothing() {
        assert!(plan_batches(0, 5).windows.is_empty());
        assert!(plan_batches(5, 0).windows.is_empty());
    }
}
