//! Tabular data model: schema, datasets, missing-value masks, unit-interval
//! scaling, and stratified fold assignment.
//!
//! Everything downstream (amputation, imputers, the LLM pipeline, the bench
//! runner) consumes these types. Datasets are immutable after construction;
//! operations return new values.

mod dataset;
mod folds;
mod ingest;
mod mask;
mod normalize;

pub use dataset::{Cell, DataScale, Dataset, FeatureKind, FeatureSchema};
pub use folds::{stratified_kfold, FoldAssignment};
pub use ingest::{load_csv, write_csv};
pub use mask::{apply_mask, GroundTruthStore, MaskOrigin, MissingMask};
pub use normalize::{apply_normalizer, fit_normalizer, ColumnRange, NormalizationParams};
