//! Benchmark harness for missing-data imputation.
//!
//! The crate covers the full experimental loop: synthetic dataset generation,
//! MCAR/MAR/MNAR amputation with exact quotas, classical imputers (mean, kNN,
//! MICE, SoftImpute, missForest), an LLM batch-prompt imputation protocol
//! with validation/retry/fallback and cost metering, and NRMSE-based
//! evaluation with rank, Pareto, and fallback reporting.

pub mod amputation;
pub mod bench;
pub mod error;
pub mod imputers;
pub mod llm;
pub mod providers;
pub mod seed;
pub mod synthgen;
pub mod tabular;

pub use error::{Error, Result};
