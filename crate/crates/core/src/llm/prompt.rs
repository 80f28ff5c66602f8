//! Prompt assembly and window serialization.

use crate::llm::batch::BatchWindow;
use crate::tabular::{Cell, Dataset};

/// Marker rendered into the payload for cells the model must fill. Distinct
/// from the placeholders the model is forbidden to output.
pub const MISSING_TOKEN: &str = "<MISSING>";

/// Plain-decimal rendering with at most 6 significant digits of fractional
/// precision, trailing zeros trimmed. Values at 1e6 and above keep their
/// full integer part.
pub fn format_significant(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        // Never serialized from valid datasets; kept total for safety.
        return v.to_string();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (5 - exponent).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Renders the window as a comma-separated table: a header of feature names,
/// then one line per row. Missing cells become the marker token.
pub fn serialize_batch(data: &Dataset, window: &BatchWindow) -> String {
    let feature_cols = data.feature_cols();
    let cols = &feature_cols[window.col_start..window.col_end];
    let mut out = cols
        .iter()
        .map(|&c| data.feature(c).name.clone())
        .collect::<Vec<_>>()
        .join(",");
    for r in window.row_start..window.row_end {
        out.push('\n');
        let line = cols
            .iter()
            .map(|&c| match data.cell(r, c) {
                None => MISSING_TOKEN.to_string(),
                Some(Cell::Num(v)) => format_significant(v),
                Some(Cell::Cat(code)) => data
                    .feature(c)
                    .categories()
                    .expect("categorical cell in categorical column")[code as usize]
                    .clone(),
            })
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&line);
    }
    out
}

/// The prompt blocks, kept separate so tests can pin each one. Rendering
/// order is persona, intro, task, constraints, output format, strict rules,
/// payload; the persona travels as the system message and the rest joins
/// into the user message.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptBundle {
    pub persona: String,
    pub dataset_tag: String,
    pub intro: String,
    pub task: String,
    pub constraints_block: String,
    pub output_format_block: String,
    pub strict_rules_block: String,
    pub payload: String,
}

impl PromptBundle {
    pub fn system(&self) -> &str {
        &self.persona
    }

    pub fn render_user(&self) -> String {
        [
            self.intro.as_str(),
            self.task.as_str(),
            self.constraints_block.as_str(),
            self.output_format_block.as_str(),
            self.strict_rules_block.as_str(),
            self.payload.as_str(),
        ]
        .join("\n\n")
    }
}

pub fn build_prompt(dataset_tag: &str, payload: String) -> PromptBundle {
    PromptBundle {
        persona: "You are a meticulous data analyst who completes tabular datasets.".to_string(),
        dataset_tag: dataset_tag.to_string(),
        intro: format!(
            "I am providing a subset of the dataset \"{dataset_tag}\". Cells marked {MISSING_TOKEN} are missing."
        ),
        task: format!(
            "Estimate every {MISSING_TOKEN} cell from the patterns in the observed values and return the completed table."
        ),
        constraints_block: "Constraints: work from the table alone and do not execute code. Reply with the table only and do not explain your choices. You must never output NaN or ? in any cell.".to_string(),
        output_format_block: "Output format: bare comma-separated values with the same header line, the same column order, and the same number of rows. No markdown fences, no commentary.".to_string(),
        strict_rules_block: "Strict rules: copy every observed value exactly as given. Fill every missing cell. Continuous values must be plain decimal numbers; categorical values must be labels already present in that column.".to_string(),
        payload,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::batch::plan_batches;
    use crate::tabular::FeatureSchema;

    fn mixed_dataset() -> Dataset {
        let schema = vec![
            FeatureSchema::continuous("len"),
            FeatureSchema::categorical("hue", vec!["red".into(), "blue".into()]),
            FeatureSchema::continuous("t").into_target(),
        ];
        let rows = vec![
            vec![Some(Cell::Num(1.25)), Some(Cell::Cat(0)), Some(Cell::Num(0.0))],
            vec![None, Some(Cell::Cat(1)), Some(Cell::Num(1.0))],
            vec![Some(Cell::Num(0.000123456)), None, Some(Cell::Num(0.0))],
        ];
        Dataset::from_rows("m", schema, rows).unwrap()
    }

    #[test]
    fn payload_renders_markers_and_labels() {
        let data = mixed_dataset();
        let window = plan_batches(3, 2).windows[0];
        let payload = serialize_batch(&data, &window);
        assert_eq!(payload, "len,hue\n1.25,red\n<MISSING>,blue\n0.000123456,<MISSING>");
        assert_eq!(payload.matches(MISSING_TOKEN).count(), 2);
    }

    #[test]
    fn fully_observed_window_has_no_markers() {
        let data = mixed_dataset();
        let window = BatchWindow { row_start: 0, row_end: 1, col_start: 0, col_end: 2 };
        assert_eq!(serialize_batch(&data, &window).matches(MISSING_TOKEN).count(), 0);
    }

    #[test]
    fn significant_digit_rendering_round_trips() {
        for v in [
            0.0,
            1.0,
            -1.0,
            1.25,
            123456.0,
            1234567.0,
            0.000123456,
            -98.7654321,
            3.14159265,
            2e-9,
        ] {
            let s = format_significant(v);
            let back: f64 = s.parse().unwrap();
            let tol = 1e-5 * v.abs();
            assert!((back - v).abs() <= tol.max(0.0), "{v} -> {s} -> {back}");
        }
        assert_eq!(format_significant(1.25), "1.25");
        assert_eq!(format_significant(3.14159265), "3.14159");
        assert_eq!(format_significant(-98.7654321), "-98.7654");
        assert_eq!(format_significant(1234567.0), "1234567");
    }

    #[test]
    fn prompt_carries_the_mandatory_sentences() {
        let bundle = build_prompt("Synthetic", "a,b\n1,2".to_string());
        let user = bundle.render_user();
        assert!(bundle.intro.contains("I am providing a subset of the dataset"));
        assert!(user.contains("I am providing a subset of the dataset"));
        assert!(user.contains("do not execute code"));
        assert!(user.contains("do not explain"));
        assert!(user.contains("never output NaN or ?"));
        assert!(user.contains("\"Synthetic\""));
        assert!(user.ends_with("a,b\n1,2"));
    }

    #[test]
    fn block_order_is_stable() {
        let bundle = build_prompt("tag", "payload".to_string());
        let user = bundle.render_user();
        let positions: Vec<usize> = [
            bundle.intro.as_str(),
            bundle.task.as_str(),
            bundle.constraints_block.as_str(),
            bundle.output_format_block.as_str(),
            bundle.strict_rules_block.as_str(),
            "payload",
        ]
        .iter()
        .map(|block| user.find(*block).unwrap())
        .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_payload_is_still_renderable() {
        let bundle = build_prompt("tag", String::new());
        assert!(bundle.render_user().ends_with("\n\n"));
    }
}
