//! CSV ingestion.
//!
//! The corpus mixes missingness conventions, so the empty string, "NA",
//! "NaN", and "?" all map to missing. Without a schema hint, a column is
//! continuous when every observed cell parses as a finite real and
//! categorical otherwise, and the last column is taken as the target.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tabular::{Cell, DataScale, Dataset, FeatureKind, FeatureSchema};

const MISSING_MARKERS: [&str; 4] = ["", "NA", "NaN", "?"];

fn is_missing_marker(s: &str) -> bool {
    MISSING_MARKERS.contains(&s)
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Loads a comma-separated file (header row required, "." decimal point).
///
/// When `schema_hint` is given it fixes names, kinds, and the target column;
/// hinted categorical columns with an empty category list get their
/// categories inferred from the data. Cells that cannot be parsed under the
/// column's kind are recorded as missing.
pub fn load_csv(path: impl AsRef<Path>, schema_hint: Option<Vec<FeatureSchema>>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).with_path(path))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    read_csv(file, name, schema_hint)
}

pub(crate) fn read_csv<R: Read>(
    reader: R,
    name: String,
    schema_hint: Option<Vec<FeatureSchema>>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let n_cols = headers.len();

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != n_cols {
            return Err(Error::Ingest(format!(
                "row {} has {} cells, expected {n_cols}",
                i + 1,
                record.len()
            )));
        }
        rows.push(record);
    }
    if rows.is_empty() {
        return Err(Error::Ingest("no data rows (header only)".into()));
    }

    let schema = match schema_hint {
        Some(hint) => resolve_hint(hint, &rows, n_cols)?,
        None => infer_schema(&headers, &rows),
    };

    let mut cells = Vec::with_capacity(rows.len() * n_cols);
    for record in &rows {
        for (c, feat) in schema.iter().enumerate() {
            let raw = &record[c];
            let cell = if is_missing_marker(raw) {
                None
            } else {
                match &feat.kind {
                    FeatureKind::Continuous => parse_finite(raw).map(Cell::Num),
                    FeatureKind::Categorical(cats) => cats
                        .iter()
                        .position(|label| label == raw)
                        .map(|i| Cell::Cat(i as u32)),
                }
            };
            cells.push(cell);
        }
    }

    Dataset::from_parts(name, schema, rows.len(), cells, DataScale::Raw)
}

/// Writes the dataset as CSV: header of feature names, numeric cells in
/// shortest round-trip form, categorical cells as labels, missing cells
/// empty.
pub fn write_csv<W: std::io::Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(data.schema().iter().map(|f| f.name.as_str()))?;
    for r in 0..data.n_rows() {
        let record: Vec<String> = (0..data.n_cols())
            .map(|c| match data.cell(r, c) {
                None => String::new(),
                Some(crate::tabular::Cell::Num(v)) => format!("{v}"),
                Some(crate::tabular::Cell::Cat(code)) => data
                    .feature(c)
                    .categories()
                    .expect("categorical cell in categorical column")[code as usize]
                    .clone(),
            })
            .collect();
        w.write_record(&record)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn observed_labels(rows: &[csv::StringRecord], col: usize) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for record in rows {
        let raw = &record[col];
        if !is_missing_marker(raw) && !labels.iter().any(|l| l == raw) {
            labels.push(raw.to_string());
        }
    }
    labels
}

fn infer_schema(headers: &[String], rows: &[csv::StringRecord]) -> Vec<FeatureSchema> {
    let n_cols = headers.len();
    (0..n_cols)
        .map(|c| {
            // Numeric-looking but non-finite strings ("inf") keep the column
            // continuous; the cells themselves are recorded as missing.
            let all_numeric = rows
                .iter()
                .map(|record| &record[c])
                .filter(|raw| !is_missing_marker(raw))
                .all(|raw| raw.parse::<f64>().is_ok());
            // An all-missing column is vacuously numeric and stays continuous.
            let kind = if all_numeric {
                FeatureKind::Continuous
            } else {
                FeatureKind::Categorical(observed_labels(rows, c))
            };
            let feat = FeatureSchema { name: headers[c].clone(), kind, is_target: false };
            if c == n_cols - 1 {
                feat.into_target()
            } else {
                feat
            }
        })
        .collect()
}

fn resolve_hint(
    hint: Vec<FeatureSchema>,
    rows: &[csv::StringRecord],
    n_cols: usize,
) -> Result<Vec<FeatureSchema>> {
    if hint.len() != n_cols {
        return Err(Error::Ingest(format!(
            "schema hint has {} columns, file has {n_cols}",
            hint.len()
        )));
    }
    Ok(hint
        .into_iter()
        .enumerate()
        .map(|(c, feat)| match feat.kind {
            FeatureKind::Categorical(cats) if cats.is_empty() => FeatureSchema {
                kind: FeatureKind::Categorical(observed_labels(rows, c)),
                ..feat
            },
            _ => feat,
        })
        .collect())
}
