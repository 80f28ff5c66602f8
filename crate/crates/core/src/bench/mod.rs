//! Benchmark orchestration: grid execution, range-normalized scoring, and
//! report emission.

pub mod metrics;
pub mod report;
pub mod runner;

pub use metrics::{column_ranges, nrmse};
pub use report::{
    aggregate, emit_report, fallback_report, mean_ranks, pareto_flags, pareto_points,
    read_records_csv, records_csv, AggregateCell, FallbackRow, ManifestInfo, Marker, MethodRank,
    ParetoPoint,
};
pub use runner::{
    run_benchmark, BenchMethod, BenchOutput, CellFailure, EvalRecord, LlmContext, Partition,
    RunConfig,
};
