//! Model-response parsing and validation.
//!
//! The validator is a total function over arbitrary text: it never errors,
//! it returns a verdict. A response is accepted only when a table with the
//! window's exact shape can be extracted and every cell passes schema
//! checks; everything else maps to one typed rejection reason so retries
//! and the fallback accounting stay observable.

use std::fmt;

use crate::llm::batch::BatchWindow;
use crate::llm::prompt::MISSING_TOKEN;
use crate::tabular::{Cell, FeatureKind, FeatureSchema};

/// Placeholders the model is forbidden to emit for any cell.
const FORBIDDEN_OUTPUT: [&str; 6] = [MISSING_TOKEN, "NaN", "nan", "NA", "?", ""];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InvalidReason {
    ShapeMismatch,
    NonNumeric,
    UnknownCategory,
    MissingMarkerPresent,
    Unparseable,
}

impl InvalidReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            InvalidReason::ShapeMismatch => "shape-mismatch",
            InvalidReason::NonNumeric => "non-numeric",
            InvalidReason::UnknownCategory => "unknown-category",
            InvalidReason::MissingMarkerPresent => "missing-marker-present",
            InvalidReason::Unparseable => "unparseable",
        }
    }
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid(InvalidReason),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedBatch {
    /// Window-shaped cell matrix; empty unless the verdict is Valid.
    pub cells: Vec<Vec<Cell>>,
    pub verdict: Verdict,
}

impl ParsedBatch {
    fn invalid(reason: InvalidReason) -> ParsedBatch {
        ParsedBatch { cells: Vec::new(), verdict: Verdict::Invalid(reason) }
    }
}

/// Validates a response against the window shape and the schemas of the
/// window's columns (`schemas.len() == window.n_cols()`). Markdown fences
/// and surrounding prose are stripped when a table is embedded.
pub fn parse_and_validate(
    response: &str,
    window: &BatchWindow,
    schemas: &[FeatureSchema],
) -> ParsedBatch {
    assert_eq!(schemas.len(), window.n_cols(), "one schema per window column");
    let lines: Vec<Vec<String>> = response
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("```"))
        .map(|l| l.split(',').map(|f| f.trim().to_string()).collect())
        .collect();

    // A header-like line starts with the first expected column name; data
    // rows are the following lines of the same width. A dropped or added
    // column shows up as a header width mismatch.
    let mut rows: Option<&[Vec<String>]> = None;
    for (i, fields) in lines.iter().enumerate() {
        if fields[0] == schemas[0].name {
            if fields.len() != window.n_cols() {
                return ParsedBatch::invalid(InvalidReason::ShapeMismatch);
            }
            let mut j = i + 1;
            while j < lines.len() && lines[j].len() == fields.len() {
                j += 1;
            }
            rows = Some(&lines[i + 1..j]);
            break;
        }
    }
    // No header found: fall back to the longest run of correctly-shaped
    // lines (models sometimes omit the header).
    let headerless: Vec<Vec<String>>;
    let rows: &[Vec<String>] = match rows {
        Some(r) => r,
        None => {
            let mut best: &[Vec<String>] = &[];
            let mut i = 0;
            while i < lines.len() {
                let mut j = i;
                while j < lines.len() && lines[j].len() == window.n_cols() {
                    j += 1;
                }
                if j > i && j - i > best.len() {
                    best = &lines[i..j];
                }
                i = j.max(i + 1);
            }
            if best.is_empty() {
                return ParsedBatch::invalid(InvalidReason::Unparseable);
            }
            headerless = best.to_vec();
            &headerless
        }
    };

    if rows.len() != window.n_rows() {
        return ParsedBatch::invalid(InvalidReason::ShapeMismatch);
    }

    let mut cells = Vec::with_capacity(rows.len());
    for row in rows {
        let mut out = Vec::with_capacity(row.len());
        for (c, raw) in row.iter().enumerate() {
            if FORBIDDEN_OUTPUT.contains(&raw.as_str()) {
                return ParsedBatch::invalid(InvalidReason::MissingMarkerPresent);
            }
            match &schemas[c].kind {
                FeatureKind::Continuous => match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => out.push(Cell::Num(v)),
                    _ => return ParsedBatch::invalid(InvalidReason::NonNumeric),
                },
                FeatureKind::Categorical(labels) => {
                    match labels.iter().position(|l| l == raw) {
                        Some(code) => out.push(Cell::Cat(code as u32)),
                        None => return ParsedBatch::invalid(InvalidReason::UnknownCategory),
                    }
                }
            }
        }
        cells.push(out);
    }
    ParsedBatch { cells, verdict: Verdict::Valid }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::batch::BatchWindow;

    fn window(rows: usize, cols: usize) -> BatchWindow {
        BatchWindow { row_start: 0, row_end: rows, col_start: 0, col_end: cols }
    }

    fn schemas() -> Vec<FeatureSchema> {
        vec![
            FeatureSchema::continuous("len"),
            FeatureSchema::categorical("hue", vec!["red".into(), "blue".into()]),
        ]
    }

    #[test]
    fn clean_echo_is_valid() {
        let got = parse_and_validate("len,hue\n1.5,red\n2,blue", &window(2, 2), &schemas());
        assert_eq!(got.verdict, Verdict::Valid);
        assert_eq!(
            got.cells,
            vec![
                vec![Cell::Num(1.5), Cell::Cat(0)],
                vec![Cell::Num(2.0), Cell::Cat(1)],
            ]
        );
    }

    #[test]
    fn fenced_and_prose_wrapped_tables_are_extracted() {
        let fenced = "Here you go:\n```csv\nlen,hue\n1.5,red\n2,blue\n```\nDone!";
        assert_eq!(parse_and_validate(fenced, &window(2, 2), &schemas()).verdict, Verdict::Valid);
        let prose = "Sure! Here is the completed table:\n\nlen,hue\n1.5,red\n2,blue\n\nLet me know if you need anything else.";
        assert_eq!(parse_and_validate(prose, &window(2, 2), &schemas()).verdict, Verdict::Valid);
    }

    #[test]
    fn headerless_table_is_accepted() {
        let got = parse_and_validate("1.5,red\n2,blue", &window(2, 2), &schemas());
        assert_eq!(got.verdict, Verdict::Valid);
    }

    #[test]
    fn dropped_column_is_shape_mismatch() {
        let got = parse_and_validate("len\n1.5\n2", &window(2, 2), &schemas());
        assert_eq!(got.verdict, Verdict::Invalid(InvalidReason::ShapeMismatch));
    }

    #[test]
    fn wrong_row_count_is_shape_mismatch() {
        let got = parse_and_validate("len,hue\n1.5,red", &window(2, 2), &schemas());
        assert_eq!(got.verdict, Verdict::Invalid(InvalidReason::ShapeMismatch));
    }

    #[test]
    fn forbidden_placeholders_are_flagged() {
        for bad in ["NaN", "nan", "NA", "?", "<MISSING>"] {
            let text = format!("len,hue\n{bad},red\n2,blue");
            let got = parse_and_validate(&text, &window(2, 2), &schemas());
            assert_eq!(
                got.verdict,
                Verdict::Invalid(InvalidReason::MissingMarkerPresent),
                "{bad}"
            );
        }
    }

    #[test]
    fn non_numeric_and_unknown_category_are_distinct() {
        let got = parse_and_validate("len,hue\nabc,red\n2,blue", &window(2, 2), &schemas());
        assert_eq!(got.verdict, Verdict::Invalid(InvalidReason::NonNumeric));
        let got = parse_and_validate("len,hue\n1.5,mauve\n2,blue", &window(2, 2), &schemas());
        assert_eq!(got.verdict, Verdict::Invalid(InvalidReason::UnknownCategory));
        let got = parse_and_validate("len,hue\ninf,red\n2,blue", &window(2, 2), &schemas());
        assert_eq!(got.verdict, Verdict::Invalid(InvalidReason::NonNumeric));
    }

    #[test]
    fn pure_noise_is_unparseable() {
        for junk in ["::::", "no table here at all", ""] {
            let got = parse_and_validate(junk, &window(2, 2), &schemas());
            assert_eq!(got.verdict, Verdict::Invalid(InvalidReason::Unparseable), "{junk:?}");
        }
    }
}
