//! Token and cost accounting for prompt-based imputation.

use crate::error::{Error, Result};
use crate::providers::ProviderProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchOutcome {
    Accepted,
    Fallback,
}

impl BatchOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            BatchOutcome::Accepted => "accepted",
            BatchOutcome::Fallback => "fallback",
        }
    }
}

/// One window's accounting, summed over all of its attempts.
#[derive(Clone, Debug, PartialEq)]
pub struct RequestRecord {
    pub batch_id: String,
    pub attempts: u32,
    pub input_tokens: i64,
    pub output_tokens: i64,
    pub outcome: BatchOutcome,
    pub latency: f64,
    /// True when any attempt lacked transport-reported usage and the
    /// character heuristic stood in.
    pub approximate: bool,
}

/// Deterministic stand-in when the transport reports no usage:
/// ceil(characters / 4).
pub fn approx_tokens(text: &str) -> i64 {
    (text.chars().count() as i64 + 3) / 4
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UsageLedger {
    records: Vec<RequestRecord>,
}

impl UsageLedger {
    pub fn new() -> UsageLedger {
        UsageLedger::default()
    }

    pub fn push(&mut self, record: RequestRecord) {
        self.records.push(record);
    }

    pub fn merge(&mut self, other: UsageLedger) {
        self.records.extend(other.records);
    }

    pub fn records(&self) -> &[RequestRecord] {
        &self.records
    }

    pub fn total_batches(&self) -> usize {
        self.records.len()
    }

    pub fn total_input_tokens(&self) -> i64 {
        self.records.iter().map(|r| r.input_tokens).sum()
    }

    pub fn total_output_tokens(&self) -> i64 {
        self.records.iter().map(|r| r.output_tokens).sum()
    }

    pub fn fallback_count(&self) -> usize {
        self.records.iter().filter(|r| r.outcome == BatchOutcome::Fallback).count()
    }

    /// Fallback batches over total batches; 0 when nothing ran.
    pub fn fallback_rate(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.fallback_count() as f64 / self.records.len() as f64
        }
    }

    pub fn total_latency(&self) -> f64 {
        self.records.iter().map(|r| r.latency).sum()
    }

    pub fn any_approximate(&self) -> bool {
        self.records.iter().any(|r| r.approximate)
    }

    pub fn cost(&self, profile: &ProviderProfile) -> Result<f64> {
        meter_cost(self, profile)
    }
}

/// Linear pricing: sum of input tokens times price_in plus output tokens
/// times price_out, divided by one million.
pub fn meter_cost(ledger: &UsageLedger, profile: &ProviderProfile) -> Result<f64> {
    let mut dollars = 0.0;
    for record in ledger.records() {
        if record.input_tokens < 0 || record.output_tokens < 0 {
            return Err(Error::Ledger(format!(
                "negative token count on batch {}",
                record.batch_id
            )));
        }
        dollars += record.input_tokens as f64 * profile.price_in
            + record.output_tokens as f64 * profile.price_out;
    }
    Ok(dollars / 1e6)
}
