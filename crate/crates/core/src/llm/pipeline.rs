//! Window dispatch: retries, fallback, and partition assembly.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::imputers::{column_statistics, finalize, CellProvenance, ImputationResult};
use crate::llm::batch::{plan_batches, BatchWindow};
use crate::llm::ledger::{approx_tokens, BatchOutcome, RequestRecord, UsageLedger};
use crate::llm::parse::{parse_and_validate, Verdict};
use crate::llm::prompt::{build_prompt, serialize_batch};
use crate::providers::{ChatRequest, ProviderProfile, Transport};
use crate::tabular::{Cell, Dataset, FeatureSchema};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: f64,
    pub backoff_factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> RetryPolicy {
        RetryPolicy { max_retries: 3, base_delay: 1.0, backoff_factor: 2.0 }
    }
}

impl RetryPolicy {
    /// Standard retry budget with no waiting, for scripted offline runs.
    pub fn zero_delay() -> RetryPolicy {
        RetryPolicy { base_delay: 0.0, ..RetryPolicy::default() }
    }

    /// Seconds to wait before retry number `retry` (1-based):
    /// base_delay x backoff_factor^(retry-1).
    pub fn delay_before_retry(&self, retry: u32) -> f64 {
        self.base_delay * self.backoff_factor.powi(retry as i32 - 1)
    }
}

/// Sends one window, retrying invalid content and transport failures alike,
/// and completes the window either from the accepted response or from the
/// train-statistic fallback. Observed cells always come from the source
/// partition, never from the model. Returns the window-shaped cell matrix
/// and its ledger record.
#[allow(clippy::too_many_arguments)]
pub fn impute_batch_with_retries(
    data: &Dataset,
    window: &BatchWindow,
    batch_id: &str,
    dataset_tag: &str,
    profile: &ProviderProfile,
    policy: &RetryPolicy,
    transport: &dyn Transport,
    fallback_stats: &[Option<Cell>],
) -> Result<(Vec<Vec<Cell>>, RequestRecord)> {
    profile.validate()?;
    let feature_cols = data.feature_cols();
    let window_cols = &feature_cols[window.col_start..window.col_end];
    for &c in window_cols {
        if fallback_stats.get(c).map_or(true, Option::is_none) {
            return Err(Error::Config(format!(
                "no fallback statistic for column {c}; train partition must observe it"
            )));
        }
    }
    let schemas: Vec<FeatureSchema> =
        window_cols.iter().map(|&c| data.feature(c).clone()).collect();

    let bundle = build_prompt(dataset_tag, serialize_batch(data, window));
    let request = ChatRequest {
        system: bundle.system().to_string(),
        user: bundle.render_user(),
        temperature: profile.temperature,
        max_output_tokens: None,
        tools_enabled: false,
    };
    let approx_input = approx_tokens(&request.system) + approx_tokens(&request.user);

    let mut input_tokens = 0i64;
    let mut output_tokens = 0i64;
    let mut latency = 0.0;
    let mut approximate = false;
    let mut accepted: Option<Vec<Vec<Cell>>> = None;
    let max_attempts = 1 + policy.max_retries;
    let mut attempts = 0;

    for attempt in 1..=max_attempts {
        attempts = attempt;
        match transport.complete_chat(&request) {
            Ok(response) => {
                latency += response.latency;
                match response.input_tokens {
                    Some(t) => input_tokens += t as i64,
                    None => {
                        input_tokens += approx_input;
                        approximate = true;
                    }
                }
                match response.output_tokens {
                    Some(t) => output_tokens += t as i64,
                    None => {
                        output_tokens += approx_tokens(&response.text);
                        approximate = true;
                    }
                }
                let parsed = parse_and_validate(&response.text, window, &schemas);
                if parsed.verdict == Verdict::Valid {
                    accepted = Some(parsed.cells);
                    break;
                }
            }
            // Transport failures and invalid content share the retry path;
            // the request went out, so its tokens are still charged.
            Err(_) => {
                input_tokens += approx_input;
                approximate = true;
            }
        }
        if attempt < max_attempts {
            let delay = policy.delay_before_retry(attempt);
            if delay > 0.0 {
                std::thread::sleep(std::time::Duration::from_secs_f64(delay));
            }
        }
    }

    let outcome = if accepted.is_some() { BatchOutcome::Accepted } else { BatchOutcome::Fallback };
    let cells: Vec<Vec<Cell>> = (window.row_start..window.row_end)
        .map(|r| {
            window_cols
                .iter()
                .enumerate()
                .map(|(wc, &c)| match data.cell(r, c) {
                    // Observed cells are copied from the source no matter
                    // what the model echoed back.
                    Some(cell) => cell,
                    None => match &accepted {
                        Some(model) => model[r - window.row_start][wc],
                        None => fallback_stats[c].expect("fallback statistic checked above"),
                    },
                })
                .collect()
        })
        .collect();

    let record = RequestRecord {
        batch_id: batch_id.to_string(),
        attempts,
        input_tokens,
        output_tokens,
        outcome,
        latency,
        approximate,
    };
    Ok((cells, record))
}

/// Completes every missing cell of one fold partition through the prompt
/// pipeline. `stats_source` supplies the fallback statistics (the train
/// partition, for both partitions of a fold). Windows are dispatched in
/// plan order and committed by window index.
pub fn impute_llm_partition(
    data: &Dataset,
    stats_source: &Dataset,
    dataset_tag: &str,
    id_prefix: &str,
    profile: &ProviderProfile,
    policy: &RetryPolicy,
    transport: &dyn Transport,
) -> Result<(ImputationResult, UsageLedger)> {
    profile.validate()?;
    if stats_source.schema() != data.schema() {
        return Err(Error::Impute("partition schemas differ".into()));
    }
    let start = Instant::now();
    let fallback_stats = column_statistics(stats_source);
    let plan = plan_batches(data.n_rows(), data.feature_cols().len());

    let mut completed = data.clone();
    let mut provenance = std::collections::BTreeMap::new();
    let mut ledger = UsageLedger::new();
    for (index, window) in plan.windows.iter().enumerate() {
        let batch_id = format!("{id_prefix}/w{index:03}");
        let (cells, record) = impute_batch_with_retries(
            data,
            window,
            &batch_id,
            dataset_tag,
            profile,
            policy,
            transport,
            &fallback_stats,
        )?;
        let origin = match record.outcome {
            BatchOutcome::Accepted => CellProvenance::Model,
            BatchOutcome::Fallback => CellProvenance::Fallback,
        };
        let feature_cols = data.feature_cols();
        for r in window.row_start..window.row_end {
            for (wc, &c) in feature_cols[window.col_start..window.col_end].iter().enumerate() {
                if data.is_missing(r, c) {
                    completed.set_cell(r, c, Some(cells[r - window.row_start][wc]));
                    provenance.insert((r, c), origin);
                }
            }
        }
        ledger.push(record);
    }
    let result = finalize(data, completed, provenance, 0.0, start.elapsed().as_secs_f64())?;
    Ok((result, ledger))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{MockProvider, MockScript};
    use crate::tabular::FeatureSchema;

    fn profile() -> ProviderProfile {
        ProviderProfile::builtin("xiaomi/mimo-v2-flash").unwrap()
    }

    fn small_data() -> Dataset {
        let schema = vec![
            FeatureSchema::continuous("a"),
            FeatureSchema::continuous("b"),
            FeatureSchema::continuous("t").into_target(),
        ];
        let rows = vec![
            vec![Some(Cell::Num(1.0)), Some(Cell::Num(2.0)), Some(Cell::Num(0.0))],
            vec![Some(Cell::Num(3.0)), None, Some(Cell::Num(1.0))],
            vec![Some(Cell::Num(5.0)), Some(Cell::Num(6.0)), Some(Cell::Num(0.0))],
        ];
        Dataset::from_rows("small", schema, rows).unwrap()
    }

    fn run(script: &str) -> Result<(ImputationResult, UsageLedger)> {
        let data = small_data();
        let transport = MockProvider::new(MockScript::parse(script, 3).unwrap());
        impute_llm_partition(
            &data,
            &data,
            "small",
            "small/f0/train",
            &profile(),
            &RetryPolicy::zero_delay(),
            &transport,
        )
    }

    #[test]
    fn valid_response_lands_on_first_attempt() {
        let (result, ledger) = run("echo-valid").unwrap();
        assert_eq!(ledger.records().len(), 1);
        let record = &ledger.records()[0];
        assert_eq!(record.attempts, 1);
        assert_eq!(record.outcome, BatchOutcome::Accepted);
        assert!(record.approximate);
        // Payload column mean of b's observed values (2, 6) is 4.
        assert_eq!(result.completed.cell(1, 1), Some(Cell::Num(4.0)));
        assert_eq!(result.fallback_count(), 0);
    }

    #[test]
    fn persistent_invalid_content_exhausts_attempts_then_falls_back() {
        let (result, ledger) = run("drop-column").unwrap();
        let record = &ledger.records()[0];
        assert_eq!(record.attempts, 4);
        assert_eq!(record.outcome, BatchOutcome::Fallback);
        assert_eq!(ledger.fallback_rate(), 1.0);
        // Train mean of column b: (2 + 6) / 2 = 4.
        assert_eq!(result.completed.cell(1, 1), Some(Cell::Num(4.0)));
        assert_eq!(
            result.provenance.get(&(1, 1)),
            Some(&CellProvenance::Fallback)
        );
    }

    #[test]
    fn transport_failures_share_the_retry_path() {
        let (_, ledger) = run("timeout\nrate-limited\necho-valid").unwrap();
        let record = &ledger.records()[0];
        assert_eq!(record.attempts, 3);
        assert_eq!(record.outcome, BatchOutcome::Accepted);
    }

    #[test]
    fn attempts_never_exceed_one_plus_max_retries() {
        for script in ["timeout", "garbage:junk", "inject-nan", "invalid:unparseable"] {
            let (_, ledger) = run(script).unwrap();
            assert_eq!(ledger.records()[0].attempts, 4, "{script}");
        }
    }

    #[test]
    fn observed_cells_survive_a_lying_model() {
        // Valid shape, wrong values everywhere: the guard must keep every
        // observed cell from the source partition.
        use crate::providers::MockBehavior;
        let lying = MockBehavior::Garbage("a,b\n9,9\n9,9\n9,9".to_string());
        let data = small_data();
        let transport = MockProvider::new(MockScript::new(vec![lying], 3).unwrap());
        let (result, ledger) = impute_llm_partition(
            &data,
            &data,
            "small",
            "p",
            &profile(),
            &RetryPolicy::zero_delay(),
            &transport,
        )
        .unwrap();
        assert_eq!(ledger.records()[0].outcome, BatchOutcome::Accepted);
        for r in 0..data.n_rows() {
            for c in data.feature_cols() {
                if !data.is_missing(r, c) {
                    assert_eq!(result.completed.cell(r, c), data.cell(r, c), "({r},{c})");
                }
            }
        }
        // The one missing cell did come from the model.
        assert_eq!(result.completed.cell(1, 1), Some(Cell::Num(9.0)));
    }

    #[test]
    fn default_delays_follow_the_geometric_series() {
        let policy = RetryPolicy::default();
        assert_eq!(policy.delay_before_retry(1), 1.0);
        assert_eq!(policy.delay_before_retry(2), 2.0);
        assert_eq!(policy.delay_before_retry(3), 4.0);
    }

    #[test]
    fn identical_scripts_give_identical_runs() {
        let (res_a, ledger_a) = run("inject-nan\necho-valid").unwrap();
        let (res_b, ledger_b) = run("inject-nan\necho-valid").unwrap();
        assert_eq!(res_a.completed, res_b.completed);
        // Everything but measured wall time must replay exactly.
        for (a, b) in ledger_a.records().iter().zip(ledger_b.records()) {
            assert_eq!(a.batch_id, b.batch_id);
            assert_eq!(a.attempts, b.attempts);
            assert_eq!((a.input_tokens, a.output_tokens), (b.input_tokens, b.output_tokens));
            assert_eq!(a.outcome, b.outcome);
            assert_eq!(a.approximate, b.approximate);
        }
    }

    #[test]
    fn ledger_covers_every_window_of_a_large_partition() {
        // 85 rows x 12 features: 3 row tiles x 2 column tiles = 6 windows.
        let mut schema: Vec<FeatureSchema> =
            (0..12).map(|i| FeatureSchema::continuous(format!("f{i}"))).collect();
        schema.push(FeatureSchema::continuous("t").into_target());
        let rows: Vec<Vec<Option<Cell>>> = (0..85)
            .map(|r| {
                let mut row: Vec<Option<Cell>> = (0..12)
                    .map(|c| {
                        if (r + c) % 17 == 0 {
                            None
                        } else {
                            Some(Cell::Num((r * 12 + c) as f64))
                        }
                    })
                    .collect();
                row.push(Some(Cell::Num(0.0)));
                row
            })
            .collect();
        let data = Dataset::from_rows("wide", schema, rows).unwrap();
        let transport = MockProvider::new(MockScript::parse("echo-valid", 0).unwrap());
        let (result, ledger) = impute_llm_partition(
            &data,
            &data,
            "wide",
            "wide/f0/train",
            &profile(),
            &RetryPolicy::zero_delay(),
            &transport,
        )
        .unwrap();
        assert_eq!(ledger.records().len(), 6);
        assert_eq!(result.completed.missing_count(), 0);
        assert!(ledger.records().iter().all(|r| r.outcome == BatchOutcome::Accepted));
        assert_eq!(ledger.records()[5].batch_id, "wide/f0/train/w005");
    }

    #[test]
    fn misconfigured_profile_fails_before_any_attempt() {
        let mut bad = profile();
        bad.tools_enabled = true;
        let data = small_data();
        let transport = MockProvider::new(MockScript::parse("echo-valid", 0).unwrap());
        let err = impute_llm_partition(
            &data,
            &data,
            "small",
            "p",
            &bad,
            &RetryPolicy::zero_delay(),
            &transport,
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
