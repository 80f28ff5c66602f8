//! Core dataset representation: per-column schema plus a row-major matrix of
//! optional cells.

use crate::error::{Error, Result};

/// A single observed value. Categorical values are stored as integer codes
/// into the column's category list, assigned in first-appearance order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(u32),
}

impl Cell {
    /// Numeric view used by distance, regression, and correlation code:
    /// continuous cells pass through, categorical cells yield their code.
    pub fn encoded(self) -> f64 {
        match self {
            Cell::Num(v) => v,
            Cell::Cat(c) => c as f64,
        }
    }

    pub fn as_num(self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(v),
            Cell::Cat(_) => None,
        }
    }

    pub fn as_cat(self) -> Option<u32> {
        match self {
            Cell::Cat(c) => Some(c),
            Cell::Num(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    Continuous,
    /// Ordered category labels; cell codes index into this list.
    Categorical(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    pub is_target: bool,
}

impl FeatureSchema {
    pub fn continuous(name: impl Into<String>) -> Self {
        FeatureSchema { name: name.into(), kind: FeatureKind::Continuous, is_target: false }
    }

    pub fn categorical(name: impl Into<String>, categories: Vec<String>) -> Self {
        FeatureSchema { name: name.into(), kind: FeatureKind::Categorical(categories), is_target: false }
    }

    pub fn into_target(mut self) -> Self {
        self.is_target = true;
        self
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical(_))
    }

    pub fn categories(&self) -> Option<&[String]> {
        match &self.kind {
            FeatureKind::Categorical(c) => Some(c),
            FeatureKind::Continuous => None,
        }
    }

    pub fn n_categories(&self) -> usize {
        self.categories().map_or(0, <[String]>::len)
    }
}

/// Which affine frame the cell values live in. The benchmark keeps classical
/// imputers on `Unit` data and the LLM path on `Raw` data; the tag lets the
/// runner assert that the two pipelines never cross.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataScale {
    Raw,
    Unit,
}

/// Named tabular matrix. Exactly one schema column is the target; the target
/// is never amputated or imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    schema: Vec<FeatureSchema>,
    n_rows: usize,
    cells: Vec<Option<Cell>>,
    scale: DataScale,
}

impl Dataset {
    pub fn from_rows(
        name: impl Into<String>,
        schema: Vec<FeatureSchema>,
        rows: Vec<Vec<Option<Cell>>>,
    ) -> Result<Self> {
        let n_cols = schema.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Schema(format!(
                    "row {i} has {} cells, schema has {n_cols} columns",
                    row.len()
                )));
            }
        }
        let n_rows = rows.len();
        let cells = rows.into_iter().flatten().collect();
        Self::from_parts(name.into(), schema, n_rows, cells, DataScale::Raw)
    }

    pub(crate) fn from_parts(
        name: String,
        schema: Vec<FeatureSchema>,
        n_rows: usize,
        cells: Vec<Option<Cell>>,
        scale: DataScale,
    ) -> Result<Self> {
        let data = Dataset { name, schema, n_rows, cells, scale };
        data.validate()?;
        Ok(data)
    }

    fn validate(&self) -> Result<()> {
        let n_cols = self.schema.len();
        let targets = self.schema.iter().filter(|s| s.is_target).count();
        if targets != 1 {
            return Err(Error::Schema(format!("expected exactly 1 target column, found {targets}")));
        }
        if n_cols < 2 {
            return Err(Error::Schema("dataset needs at least one non-target feature".into()));
        }
        if self.n_rows == 0 {
            return Err(Error::Schema("dataset has no rows".into()));
        }
        if self.cells.len() != self.n_rows * n_cols {
            return Err(Error::Schema(format!(
                "cell buffer holds {} values, expected {} ({} rows x {} columns)",
                self.cells.len(),
                self.n_rows * n_cols,
                self.n_rows,
                n_cols
            )));
        }
        for (c, feat) in self.schema.iter().enumerate() {
            if feat.is_categorical() && feat.n_categories() == 0 {
                return Err(Error::Schema(format!("categorical column '{}' has no categories", feat.name)));
            }
            for r in 0..self.n_rows {
                match (self.cell(r, c), &feat.kind) {
                    (None, _) => {}
                    (Some(Cell::Num(v)), FeatureKind::Continuous) => {
                        if !v.is_finite() {
                            return Err(Error::Schema(format!(
                                "non-finite value at row {r}, column '{}'",
                                feat.name
                            )));
                        }
                    }
                    (Some(Cell::Cat(code)), FeatureKind::Categorical(cats)) => {
                        if code as usize >= cats.len() {
                            return Err(Error::Schema(format!(
                                "category code {code} out of range at row {r}, column '{}' ({} categories)",
                                feat.name,
                                cats.len()
                            )));
                        }
                    }
                    (Some(_), _) => {
                        return Err(Error::Schema(format!(
                            "cell kind does not match column kind at row {r}, column '{}'",
                            feat.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &[FeatureSchema] {
        &self.schema
    }

    pub fn feature(&self, col: usize) -> &FeatureSchema {
        &self.schema[col]
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn scale(&self) -> DataScale {
        self.scale
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<Cell> {
        debug_assert!(row < self.n_rows && col < self.n_cols());
        self.cells[row * self.n_cols() + col]
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.cell(row, col).is_none()
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    /// Index of the unique target column.
    pub fn target_col(&self) -> usize {
        self.schema
            .iter()
            .position(|s| s.is_target)
            .expect("validated dataset has a target column")
    }

    /// Indices of non-target columns, ascending.
    pub fn feature_cols(&self) -> Vec<usize> {
        (0..self.n_cols()).filter(|&c| !self.schema[c].is_target).collect()
    }

    /// Observed (row, value) pairs of one column, ascending by row.
    pub fn observed_in_col(&self, col: usize) -> impl Iterator<Item = (usize, Cell)> + '_ {
        (0..self.n_rows).filter_map(move |r| self.cell(r, col).map(|v| (r, v)))
    }

    /// New dataset holding the given rows in the given order.
    pub fn subset_rows(&self, rows: &[usize]) -> Dataset {
        let n_cols = self.n_cols();
        let mut cells = Vec::with_capacity(rows.len() * n_cols);
        for &r in rows {
            assert!(r < self.n_rows, "row index {r} out of range");
            cells.extend_from_slice(&self.cells[r * n_cols..(r + 1) * n_cols]);
        }
        Dataset {
            name: self.name.clone(),
            schema: self.schema.clone(),
            n_rows: rows.len(),
            cells,
            scale: self.scale,
        }
    }

    pub(crate) fn set_cell(&mut self, row: usize, col: usize, value: Option<Cell>) {
        let n_cols = self.n_cols();
        self.cells[row * n_cols + col] = value;
    }

    pub(crate) fn with_scale(mut self, scale: DataScale) -> Dataset {
        self.scale = scale;
        self
    }

    /// Same data under a different name (report keys use the name).
    pub fn renamed(mut self, name: impl Into<String>) -> Dataset {
        self.name = name.into();
        self
    }
}
