//! Classical imputers behind one fit-on-train / transform-test interface.
//!
//! All methods fill non-target feature columns only; the target column
//! passes through untouched and must be fully observed. Categorical cells
//! are label-encoded to their integer codes for distance and regression
//! work, then decoded by rounding to the nearest valid code. Two invariants
//! are enforced on every result: observed input cells are bit-identical in
//! the output, and the output has no missing cells.

mod encode;
mod forest;
mod knn;
mod mean;
mod mice;
mod softimpute;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tabular::{Cell, Dataset};

pub use forest::impute_missforest;
pub use knn::impute_knn;
pub use mean::impute_mean;
pub use mice::impute_mice;
pub use softimpute::impute_softimpute;

pub(crate) use encode::FeatureMatrix;
pub use softimpute::svt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Mean,
    Knn,
    Mice,
    SoftImpute,
    MissForest,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Mean, Method::Knn, Method::Mice, Method::SoftImpute, Method::MissForest];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mean => "mean",
            Method::Knn => "knn",
            Method::Mice => "mice",
            Method::SoftImpute => "softimpute",
            Method::MissForest => "missforest",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Method::Mean),
            "knn" => Ok(Method::Knn),
            "mice" => Ok(Method::Mice),
            "softimpute" => Ok(Method::SoftImpute),
            "missforest" => Ok(Method::MissForest),
            other => Err(Error::Config(format!("unknown imputer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputerConfig {
    pub method: Method,
    /// Neighbor count for kNN.
    pub k: usize,
    /// Sweep cap for MICE and missForest, inner-iteration cap for SoftImpute.
    pub max_iterations: usize,
    /// Trees per forest for missForest.
    pub n_estimators: usize,
    /// SoftImpute shrinkage grid, strictly descending, values >= 0.
    /// `None` derives 10 log-spaced values from sigma_max/2 to sigma_max/200.
    pub lambda_grid: Option<Vec<f64>>,
    pub convergence_tol: f64,
    pub seed: u64,
}

impl ImputerConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        ImputerConfig {
            method,
            k: 5,
            max_iterations: match method {
                Method::MissForest => 10,
                _ => 100,
            },
            n_estimators: 10,
            lambda_grid: None,
            convergence_tol: 1e-4,
            seed,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.n_estimators < 1 {
            return Err(Error::Config("n_estimators must be at least 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Config("convergence_tol must be positive".into()));
        }
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() {
                return Err(Error::Config("lambda_grid must be nonempty".into()));
            }
            if grid.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
                return Err(Error::Config("lambda_grid values must be finite and >= 0".into()));
            }
            if grid.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Config("lambda_grid must be strictly descending".into()));
            }
        }
        Ok(())
    }
}

/// How an originally-missing cell was filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellProvenance {
    /// Produced by the method's fitted model.
    Model,
    /// Produced by a degenerate-case fallback (column mean/mode).
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputationResult {
    /// Input dataset with every missing cell filled.
    pub completed: Dataset,
    /// Provenance for exactly the cells that were missing in the input.
    pub provenance: BTreeMap<(usize, usize), CellProvenance>,
    pub fit_runtime: f64,
    pub transform_runtime: f64,
}

impl ImputationResult {
    pub fn fallback_count(&self) -> usize {
        self.provenance.values().filter(|&&p| p == CellProvenance::Fallback).count()
    }
}

/// Dispatches on `cfg.method`.
pub fn impute(
    train: &Dataset,
    test: &Dataset,
    cfg: &ImputerConfig,
) -> Result<(ImputationResult, ImputationResult)> {
    match cfg.method {
        Method::Mean => impute_mean(train, test, cfg),
        Method::Knn => impute_knn(train, test, cfg),
        Method::Mice => impute_mice(train, test, cfg),
        Method::SoftImpute => impute_softimpute(train, test, cfg),
        Method::MissForest => impute_missforest(train, test, cfg),
    }
}

/// Per-column train statistics: mean for continuous columns, mode for
/// categorical columns (ties resolved to the lowest code). `None` marks a
/// column with no observed values.
pub(crate) fn column_statistics(data: &Dataset) -> Vec<Option<Cell>> {
    (0..data.n_cols())
        .map(|c| {
            if data.feature(c).is_categorical() {
                let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
                for (_, v) in data.observed_in_col(c) {
                    if let Cell::Cat(code) = v {
                        *counts.entry(code).or_insert(0) += 1;
                    }
                }
                // BTreeMap iteration is code-ascending, so > keeps the lowest
                // code on ties.
                counts
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                    .map(|(&code, _)| Cell::Cat(code))
            } else {
                let (sum, n) = data
                    .observed_in_col(c)
                    .fold((0.0, 0usize), |(s, n), (_, v)| (s + v.encoded(), n + 1));
                (n > 0).then(|| Cell::Num(sum / n as f64))
            }
        })
        .collect()
}

/// Shared preconditions: congruent schemas, fully observed targets, and
/// every non-target train column observed at least once.
pub(crate) fn precheck(train: &Dataset, test: &Dataset, cfg: &ImputerConfig) -> Result<()> {
    cfg.validate()?;
    if train.schema() != test.schema() {
        return Err(Error::Impute("train and test partitions disagree on schema".into()));
    }
    let target = train.target_col();
    for (part, data) in [("train", train), ("test", test)] {
        if (0..data.n_rows()).any(|r| data.is_missing(r, target)) {
            return Err(Error::Impute(format!(
                "{part} partition has missing target cells; the target is never imputed"
            )));
        }
    }
    for c in train.feature_cols() {
        if train.observed_in_col(c).next().is_none() {
            return Err(Error::Impute(format!(
                "column '{}' has no observed train values",
                train.feature(c).name
            )));
        }
    }
    Ok(())
}

/// Validates the two output invariants and assembles the result.
pub(crate) fn finalize(
    input: &Dataset,
    completed: Dataset,
    provenance: BTreeMap<(usize, usize), CellProvenance>,
    fit_runtime: f64,
    transform_runtime: f64,
) -> Result<ImputationResult> {
    if completed.missing_count() != 0 {
        return Err(Error::Impute(format!(
            "imputer left {} cells missing",
            completed.missing_count()
        )));
    }
    for r in 0..input.n_rows() {
        for c in 0..input.n_cols() {
            match input.cell(r, c) {
                Some(v) => {
                    if completed.cell(r, c) != Some(v) {
                        return Err(Error::Impute(format!(
                            "observed cell ({r},{c}) was altered by the imputer"
                        )));
                    }
                }
                None => {
                    if !provenance.contains_key(&(r, c)) {
                        return Err(Error::Impute(format!(
                            "imputed cell ({r},{c}) has no provenance record"
                        )));
                    }
                }
            }
        }
    }
    if provenance.len() != input.missing_count() {
        return Err(Error::Impute("provenance records do not match the missing-cell set".into()));
    }
    Ok(ImputationResult { completed, provenance, fit_runtime, transform_runtime })
}
