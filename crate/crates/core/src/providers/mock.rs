//! Scripted in-process provider for offline runs.
//!
//! A script lists one behavior per request; behaviors are consumed in order
//! and the last one repeats once the list is exhausted. Valid responses are
//! built from the request itself: the mock locates the trailing table block
//! of the prompt, fills `<MISSING>` cells with per-column statistics of the
//! payload, and mutates the result according to the scripted fault. This
//! keeps every response deterministic for a given (script, seed) pair.

use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, ProviderError, Result};
use crate::llm::{format_significant, MISSING_TOKEN};
use crate::providers::{ChatRequest, ChatResponse, Transport};
use crate::seed::derive_seed;

#[derive(Clone, Debug, PartialEq)]
pub enum MockBehavior {
    /// Complete the payload table, filling missing cells from the payload's
    /// own column statistics.
    EchoValid,
    /// Valid completion minus its last column.
    DropColumn,
    /// Valid completion with one cell replaced by "NaN".
    InjectNan,
    /// Valid completion with one cell replaced by non-numeric text.
    InjectWord,
    /// Valid completion with one cell replaced by an out-of-schema label.
    InjectUnknownLabel,
    /// Valid completion wrapped in explanatory prose.
    ProseWrap,
    Timeout,
    RateLimited,
    /// Sleep before answering with a valid completion.
    Delay(f64),
    /// Verbatim text, table or not.
    Garbage(String),
}

impl FromStr for MockBehavior {
    type Err = Error;

    fn from_str(token: &str) -> Result<MockBehavior> {
        let token = token.trim();
        if let Some(rest) = token.strip_prefix("delay:").or_else(|| {
            token.strip_prefix("delay(").and_then(|r| r.strip_suffix(')'))
        }) {
            let seconds: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad delay in mock script: {token}")))?;
            if !(seconds >= 0.0) {
                return Err(Error::Config(format!("negative delay in mock script: {token}")));
            }
            return Ok(MockBehavior::Delay(seconds));
        }
        if let Some(text) = token.strip_prefix("garbage:") {
            return Ok(MockBehavior::Garbage(text.to_string()));
        }
        match token {
            "echo-valid" | "valid" => Ok(MockBehavior::EchoValid),
            "drop-column" | "invalid:shape-mismatch" => Ok(MockBehavior::DropColumn),
            "inject-nan" | "invalid:missing-marker-present" => Ok(MockBehavior::InjectNan),
            "invalid:non-numeric" => Ok(MockBehavior::InjectWord),
            "invalid:unknown-category" => Ok(MockBehavior::InjectUnknownLabel),
            "invalid:unparseable" => Ok(MockBehavior::Garbage("::::".to_string())),
            "prose-wrap" => Ok(MockBehavior::ProseWrap),
            "timeout" => Ok(MockBehavior::Timeout),
            "rate-limited" => Ok(MockBehavior::RateLimited),
            other => Err(Error::Config(format!("unknown mock behavior: {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MockScript {
    behaviors: Vec<MockBehavior>,
    seed: u64,
}

impl MockScript {
    pub fn new(behaviors: Vec<MockBehavior>, seed: u64) -> Result<MockScript> {
        if behaviors.is_empty() {
            return Err(Error::Config("mock script needs at least one behavior".into()));
        }
        Ok(MockScript { behaviors, seed })
    }

    /// One behavior token per line; blank lines and `#` comments skipped.
    pub fn from_file(path: &Path, seed: u64) -> Result<MockScript> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::from(e).with_path(path))?;
        Self::parse(&raw, seed)
    }

    pub fn parse(text: &str, seed: u64) -> Result<MockScript> {
        let behaviors = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(MockBehavior::from_str)
            .collect::<Result<Vec<_>>>()?;
        Self::new(behaviors, seed)
    }

    fn behavior(&self, index: usize) -> &MockBehavior {
        &self.behaviors[index.min(self.behaviors.len() - 1)]
    }
}

pub struct MockProvider {
    script: MockScript,
    next: Mutex<usize>,
}

impl MockProvider {
    pub fn new(script: MockScript) -> MockProvider {
        MockProvider { script, next: Mutex::new(0) }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn render(&self) -> String {
        let mut out = self.header.join(",");
        for row in &self.rows {
            out.push('\n');
            out.push_str(&row.join(","));
        }
        out
    }
}

/// The trailing run of non-empty lines, read as a comma-separated table.
fn trailing_table(user: &str) -> Option<Table> {
    let lines: Vec<&str> = user.lines().collect();
    let end = lines.len();
    let mut start = end;
    while start > 0 && !lines[start - 1].trim().is_empty() {
        start -= 1;
    }
    if end - start < 2 {
        return None;
    }
    let split = |l: &str| l.split(',').map(|f| f.trim().to_string()).collect::<Vec<_>>();
    let header = split(lines[start]);
    let rows: Vec<Vec<String>> = lines[start + 1..end].iter().map(|l| split(l)).collect();
    Some(Table { header, rows })
}

/// Fill statistic for one payload column: mean when every observed cell is
/// numeric, otherwise the most frequent label (ties broken by the smaller
/// label, for determinism).
fn column_fill(rows: &[Vec<String>], col: usize) -> String {
    let observed: Vec<&String> =
        rows.iter().map(|r| &r[col]).filter(|c| c.as_str() != MISSING_TOKEN).collect();
    if observed.is_empty() {
        return "0".to_string();
    }
    let numeric: Option<Vec<f64>> =
        observed.iter().map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite())).collect();
    match numeric {
        Some(values) => {
            format_significant(values.iter().sum::<f64>() / values.len() as f64)
        }
        None => {
            let mut counts: Vec<(&String, usize)> = Vec::new();
            for c in &observed {
                match counts.iter_mut().find(|(label, _)| label == &*c) {
                    Some((_, n)) => *n += 1,
                    None => counts.push((c, 1)),
                }
            }
            counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            counts[0].0.clone()
        }
    }
}

fn completed_table(table: &Table) -> Table {
    let fills: Vec<String> = (0..table.header.len()).map(|c| column_fill(&table.rows, c)).collect();
    let rows = table
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(c, cell)| {
                    if cell == MISSING_TOKEN { fills[c].clone() } else { cell.clone() }
                })
                .collect()
        })
        .collect();
    Table { header: table.header.clone(), rows }
}

impl Transport for MockProvider {
    fn complete_chat(
        &self,
        request: &ChatRequest,
    ) -> std::result::Result<ChatResponse, ProviderError> {
        let start = Instant::now();
        let index = {
            let mut next = self.next.lock().expect("mock state lock");
            let i = *next;
            *next += 1;
            i
        };
        let behavior = self.script.behavior(index).clone();

        if let MockBehavior::Timeout = behavior {
            return Err(ProviderError::Timeout);
        }
        if let MockBehavior::RateLimited = behavior {
            return Err(ProviderError::RateLimited);
        }
        if let MockBehavior::Garbage(text) = &behavior {
            return Ok(ChatResponse {
                text: text.clone(),
                input_tokens: None,
                output_tokens: None,
                latency: start.elapsed().as_secs_f64(),
            });
        }
        if let MockBehavior::Delay(seconds) = behavior {
            std::thread::sleep(std::time::Duration::from_secs_f64(seconds));
        }

        // Requests without a payload table are echoed unchanged, so every
        // behavior stays total.
        let text = match trailing_table(&request.user) {
            None => request.user.clone(),
            Some(table) => {
                let mut done = completed_table(&table);
                match behavior {
                    MockBehavior::DropColumn => {
                        done.header.pop();
                        for row in &mut done.rows {
                            row.pop();
                        }
                        done.render()
                    }
                    MockBehavior::InjectNan
                    | MockBehavior::InjectWord
                    | MockBehavior::InjectUnknownLabel => {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                            self.script.seed,
                            &["mock", &index.to_string()],
                        ));
                        let r = rng.random_range(0..done.rows.len());
                        let c = rng.random_range(0..done.header.len());
                        done.rows[r][c] = match behavior {
                            MockBehavior::InjectNan => "NaN".to_string(),
                            MockBehavior::InjectWord => "not-a-number".to_string(),
                            _ => "__unlisted__".to_string(),
                        };
                        done.render()
                    }
                    MockBehavior::ProseWrap => format!(
                        "Sure! Here is the completed table:\n\n{}\n\nLet me know if you need anything else.",
                        done.render()
                    ),
                    // EchoValid and Delay answer with the plain table.
                    _ => done.render(),
                }
            }
        };
        Ok(ChatResponse {
            text,
            input_tokens: None,
            output_tokens: None,
            latency: start.elapsed().as_secs_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAYLOAD: &str = "a,b\n1,2\n3,<MISSING>\n5,6";

    fn request() -> ChatRequest {
        ChatRequest::new("persona", format!("fill this in:\n\n{PAYLOAD}"), 0.1)
    }

    fn provider(tokens: &str) -> MockProvider {
        MockProvider::new(MockScript::parse(tokens, 9).unwrap())
    }

    #[test]
    fn echo_valid_fills_missing_with_payload_mean() {
        let resp = provider("echo-valid").complete_chat(&request()).unwrap();
        assert_eq!(resp.text, "a,b\n1,2\n3,4\n5,6");
        assert!(resp.input_tokens.is_none());
    }

    #[test]
    fn categorical_fill_uses_most_frequent_label() {
        let req = ChatRequest::new("p", "payload:\n\nc\nx\ny\nx\n<MISSING>", 0.1);
        let resp = provider("valid").complete_chat(&req).unwrap();
        assert_eq!(resp.text, "c\nx\ny\nx\nx");
    }

    #[test]
    fn drop_column_removes_the_last_column() {
        let resp = provider("drop-column").complete_chat(&request()).unwrap();
        assert_eq!(resp.text, "a\n1\n3\n5");
    }

    #[test]
    fn inject_nan_places_exactly_one_marker() {
        let resp = provider("inject-nan").complete_chat(&request()).unwrap();
        assert_eq!(resp.text.matches("NaN").count(), 1);
        assert_eq!(resp.text.lines().count(), 4);
    }

    #[test]
    fn prose_wrap_keeps_the_table_inside() {
        let resp = provider("prose-wrap").complete_chat(&request()).unwrap();
        assert!(resp.text.contains("a,b\n1,2\n3,4\n5,6"));
        assert!(resp.text.starts_with("Sure!"));
    }

    #[test]
    fn timeout_and_rate_limit_are_typed_errors() {
        assert!(matches!(
            provider("timeout").complete_chat(&request()),
            Err(ProviderError::Timeout)
        ));
        assert!(matches!(
            provider("rate-limited").complete_chat(&request()),
            Err(ProviderError::RateLimited)
        ));
    }

    #[test]
    fn delay_shows_up_in_latency() {
        let resp = provider("delay(0.05)").complete_chat(&request()).unwrap();
        assert!(resp.latency >= 0.05, "latency {}", resp.latency);
        assert_eq!(resp.text, "a,b\n1,2\n3,4\n5,6");
    }

    #[test]
    fn last_behavior_repeats_after_exhaustion() {
        let p = provider("timeout\necho-valid");
        assert!(p.complete_chat(&request()).is_err());
        for _ in 0..3 {
            assert!(p.complete_chat(&request()).is_ok());
        }
    }

    #[test]
    fn same_script_and_seed_replay_identically() {
        let tokens = "echo-valid\ninject-nan\ngarbage:???\nvalid";
        let a = provider(tokens);
        let b = provider(tokens);
        for _ in 0..6 {
            let left = a.complete_chat(&request()).unwrap().text;
            let right = b.complete_chat(&request()).unwrap().text;
            assert_eq!(left, right);
        }
    }

    #[test]
    fn script_parser_accepts_both_alias_sets() {
        let script = MockScript::parse(
            "# fault sequence\nvalid\ninvalid:shape-mismatch\ninvalid:missing-marker-present\n\ndelay:0.5\ngarbage:hello,world",
            0,
        )
        .unwrap();
        assert_eq!(script.behaviors.len(), 5);
        assert_eq!(script.behaviors[1], MockBehavior::DropColumn);
        assert_eq!(script.behaviors[2], MockBehavior::InjectNan);
        assert_eq!(script.behaviors[3], MockBehavior::Delay(0.5));
        assert_eq!(script.behaviors[4], MockBehavior::Garbage("hello,world".into()));
        assert!(MockScript::parse("", 0).is_err());
        assert!(MockScript::parse("flub", 0).is_err());
    }
}
