//! Prompt-based imputation pipeline.
//!
//! A fold partition is tiled into windows of at most 40 rows by 10 non-target
//! features. Each window becomes one prompt; the response is parsed and
//! validated, invalid content and transport failures are retried with
//! exponential backoff, and windows that never validate fall back to train
//! column statistics. Token usage and cost are metered per window.

pub mod batch;
pub mod ledger;
pub mod parse;
pub mod pipeline;
pub mod prompt;

pub use batch::{plan_batches, BatchPlan, BatchWindow, MAX_WINDOW_COLS, MAX_WINDOW_ROWS};
pub use ledger::{approx_tokens, meter_cost, BatchOutcome, RequestRecord, UsageLedger};
pub use parse::{parse_and_validate, InvalidReason, ParsedBatch, Verdict};
pub use pipeline::{impute_batch_with_retries, impute_llm_partition, RetryPolicy};
pub use prompt::{build_prompt, format_significant, serialize_batch, PromptBundle, MISSING_TOKEN};
