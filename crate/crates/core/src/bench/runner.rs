//! Experiment grid execution.
//!
//! For every (dataset x mechanism x rate x fold x method) cell the runner
//! splits with stratified folds, fits the unit scaler on the complete
//! training fold, amputates the raw partitions with fold-derived seeds, and
//! imputes. Classical methods run on unit-scaled data and are scored in that
//! space; the LLM path runs on raw data and is scored with complete-train-
//! fold extrema, so the two score families are comparable. One amputation
//! mask per (fold, mechanism, rate) is shared by every method. Failures in
//! one cell are recorded and never abort the grid.
//!
//! Classical cells of a fold run on a thread pool; the record list is
//! sorted by cell key afterwards, so parallelism cannot change the output.
//! LLM cells run sequentially because a scripted transport replays answers
//! in consumption order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::amputation::{ampute, AmputationSpec, Mechanism};
use crate::bench::metrics::{column_ranges, nrmse};
use crate::error::{Error, Result};
use crate::imputers::{impute, ImputerConfig, Method};
use crate::llm::{impute_llm_partition, RequestRecord, RetryPolicy, UsageLedger};
use crate::providers::{ProviderProfile, Transport};
use crate::seed::derive_seed;
use crate::tabular::{
    apply_mask, apply_normalizer, fit_normalizer, stratified_kfold, ColumnRange, DataScale,
    Dataset, GroundTruthStore,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchMethod {
    Classical(Method),
    Llm,
}

impl BenchMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchMethod::Classical(m) => m.as_str(),
            BenchMethod::Llm => "llm",
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("llm") {
            Ok(BenchMethod::Llm)
        } else {
            Ok(BenchMethod::Classical(s.parse()?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Partition {
    Train,
    Test,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Test => "test",
        }
    }
}

/// One scored cell of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub dataset: String,
    pub mechanism: Mechanism,
    pub rate: f64,
    pub method: String,
    pub fold: usize,
    pub partition: Partition,
    pub nrmse: f64,
    pub runtime: f64,
    pub fallback_count: usize,
    pub cost: f64,
}

impl EvalRecord {
    /// Canonical ordering key; emission sorts by this so execution order
    /// never shows in the output.
    pub fn sort_key(&self) -> (String, &'static str, f64, String, usize, u8) {
        (
            self.dataset.clone(),
            self.mechanism.as_str(),
            self.rate,
            self.method.clone(),
            self.fold,
            self.partition as u8,
        )
    }
}

/// A grid cell that was skipped; `key` locates it and `message` says why.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mechanisms: Vec<Mechanism>,
    pub rates: Vec<f64>,
    pub methods: Vec<BenchMethod>,
    pub k_folds: usize,
    pub master_seed: u64,
    /// Zeroes every recorded runtime and latency so identical inputs emit
    /// byte-identical reports.
    pub deterministic_timing: bool,
}

impl RunConfig {
    pub fn new(master_seed: u64) -> RunConfig {
        RunConfig {
            mechanisms: Mechanism::ALL.to_vec(),
            rates: vec![0.05, 0.10, 0.20],
            methods: Method::ALL.iter().copied().map(BenchMethod::Classical).collect(),
            k_folds: 5,
            master_seed,
            deterministic_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mechanisms.is_empty() || self.rates.is_empty() || self.methods.is_empty() {
            return Err(Error::Config(
                "mechanisms, rates, and methods must all be nonempty".into(),
            ));
        }
        if self.rates.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(Error::Config("rates must lie strictly between 0 and 1".into()));
        }
        if self.k_folds < 2 {
            return Err(Error::Config("k_folds must be at least 2".into()));
        }
        Ok(())
    }
}

/// Transport and pricing for LLM cells.
pub struct LlmContext<'a> {
    pub profile: &'a ProviderProfile,
    pub policy: RetryPolicy,
    pub transport: &'a dyn Transport,
}

#[derive(Debug, Default)]
pub struct BenchOutput {
    pub records: Vec<EvalRecord>,
    pub ledger: UsageLedger,
    pub failures: Vec<CellFailure>,
}

/// Both spaces of one fold, complete (pre-amputation).
struct FoldContext {
    fold: usize,
    train_raw: Dataset,
    test_raw: Dataset,
    train_unit: Dataset,
    test_unit: Dataset,
    ranges_raw: Vec<Option<ColumnRange>>,
    ranges_unit: Vec<Option<ColumnRange>>,
}

/// One amputation realization of a fold, in both spaces.
struct AmpContext {
    mechanism: Mechanism,
    rate: f64,
    train_raw: Dataset,
    truth_train_raw: GroundTruthStore,
    test_raw: Dataset,
    truth_test_raw: GroundTruthStore,
    train_unit: Dataset,
    truth_train_unit: GroundTruthStore,
    test_unit: Dataset,
    truth_test_unit: GroundTruthStore,
}

fn cell_key(dataset: &str, mech: Mechanism, rate: f64, fold: usize, method: &str) -> String {
    format!("{dataset}/{}/r{rate}/f{fold}/{method}", mech.as_str())
}

fn ensure_scale(data: &Dataset, want: DataScale) -> Result<()> {
    if data.scale() != want {
        return Err(Error::Impute(format!(
            "pipeline isolation violated: expected {want:?}-scale data, got {:?}",
            data.scale()
        )));
    }
    Ok(())
}

fn build_fold_context(data: &Dataset, folds_seed: u64, k: usize, fold: usize) -> Result<FoldContext> {
    let assignment = stratified_kfold(data, k, folds_seed)?;
    let train_raw = data.subset_rows(&assignment.train_rows(fold));
    let test_raw = data.subset_rows(&assignment.test_rows(fold));
    let params = fit_normalizer(&train_raw, &(0..train_raw.n_rows()).collect::<Vec<_>>())?;
    let train_unit = apply_normalizer(&train_raw, &params)?;
    let test_unit = apply_normalizer(&test_raw, &params)?;
    let ranges_raw = column_ranges(&train_raw);
    let ranges_unit = column_ranges(&train_unit);
    Ok(FoldContext { fold, train_raw, test_raw, train_unit, test_unit, ranges_raw, ranges_unit })
}

fn build_amp_context(
    fctx: &FoldContext,
    master_seed: u64,
    dataset: &str,
    mech: Mechanism,
    rate: f64,
) -> Result<AmpContext> {
    let rate_s = format!("{rate}");
    let fold_s = format!("{}", fctx.fold);
    type Masked = (Dataset, GroundTruthStore, Dataset, GroundTruthStore);
    let masked = |complete_raw: &Dataset, complete_unit: &Dataset, part: &str| -> Result<Masked> {
        let seed = derive_seed(master_seed, &[dataset, mech.as_str(), &rate_s, &fold_s, part]);
        let spec = AmputationSpec::new(mech, rate, seed);
        // Ranking is monotone under the unit scaling, so one mask computed
        // on raw data is the mask in both spaces.
        let mask = ampute(complete_raw, &spec)?.mask;
        let (raw, truth_raw) = apply_mask(complete_raw, &mask)?;
        let (unit, truth_unit) = apply_mask(complete_unit, &mask)?;
        Ok((raw, truth_raw, unit, truth_unit))
    };
    let (train_raw, truth_train_raw, train_unit, truth_train_unit) =
        masked(&fctx.train_raw, &fctx.train_unit, "train")?;
    let (test_raw, truth_test_raw, test_unit, truth_test_unit) =
        masked(&fctx.test_raw, &fctx.test_unit, "test")?;
    Ok(AmpContext {
        mechanism: mech,
        rate,
        train_raw,
        truth_train_raw,
        test_raw,
        truth_test_raw,
        train_unit,
        truth_train_unit,
        test_unit,
        truth_test_unit,
    })
}

fn classical_cell(
    dataset: &str,
    fctx: &FoldContext,
    amp: &AmpContext,
    method: Method,
    cfg: &RunConfig,
) -> Result<Vec<EvalRecord>> {
    ensure_scale(&amp.train_unit, DataScale::Unit)?;
    ensure_scale(&amp.test_unit, DataScale::Unit)?;
    let seed = derive_seed(
        cfg.master_seed,
        &[
            dataset,
            amp.mechanism.as_str(),
            &format!("{}", amp.rate),
            &format!("{}", fctx.fold),
            method.as_str(),
        ],
    );
    let imp_cfg = ImputerConfig::new(method, seed);
    let (res_train, res_test) = impute(&amp.train_unit, &amp.test_unit, &imp_cfg)?;
    let score = |truth: &GroundTruthStore, completed: &Dataset| -> Result<f64> {
        nrmse(truth, completed, &fctx.ranges_unit)
    };
    let record = |partition: Partition, nrmse: f64, runtime: f64, fallbacks: usize| EvalRecord {
        dataset: dataset.to_string(),
        mechanism: amp.mechanism,
        rate: amp.rate,
        method: method.as_str().to_string(),
        fold: fctx.fold,
        partition,
        nrmse,
        runtime: if cfg.deterministic_timing { 0.0 } else { runtime },
        fallback_count: fallbacks,
        cost: 0.0,
    };
    let n_train = score(&amp.truth_train_unit, &res_train.completed)?;
    let n_test = score(&amp.truth_test_unit, &res_test.completed)?;
    Ok(vec![
        record(
            Partition::Train,
            n_train,
            res_train.fit_runtime + res_train.transform_runtime,
            res_train.fallback_count(),
        ),
        record(
            Partition::Test,
            n_test,
            res_test.fit_runtime + res_test.transform_runtime,
            res_test.fallback_count(),
        ),
    ])
}

fn llm_cell(
    dataset: &str,
    fctx: &FoldContext,
    amp: &AmpContext,
    cfg: &RunConfig,
    llm: &LlmContext,
) -> Result<(Vec<EvalRecord>, UsageLedger)> {
    ensure_scale(&amp.train_raw, DataScale::Raw)?;
    ensure_scale(&amp.test_raw, DataScale::Raw)?;
    let mut ledger = UsageLedger::new();
    let mut records = Vec::new();
    for (partition, data, truth) in [
        (Partition::Train, &amp.train_raw, &amp.truth_train_raw),
        (Partition::Test, &amp.test_raw, &amp.truth_test_raw),
    ] {
        let prefix = format!(
            "{dataset}/{}/r{}/f{}/{}",
            amp.mechanism.as_str(),
            amp.rate,
            fctx.fold,
            partition.as_str()
        );
        let (result, part_ledger) = impute_llm_partition(
            data,
            &amp.train_raw,
            dataset,
            &prefix,
            llm.profile,
            &llm.policy,
            llm.transport,
        )?;
        let score = nrmse(truth, &result.completed, &fctx.ranges_raw)?;
        let cost = part_ledger.cost(llm.profile)?;
        records.push(EvalRecord {
            dataset: dataset.to_string(),
            mechanism: amp.mechanism,
            rate: amp.rate,
            method: "llm".to_string(),
            fold: fctx.fold,
            partition,
            nrmse: score,
            runtime: if cfg.deterministic_timing {
                0.0
            } else {
                result.fit_runtime + result.transform_runtime
            },
            fallback_count: result.fallback_count(),
            cost,
        });
        for r in part_ledger.records() {
            ledger.push(RequestRecord {
                latency: if cfg.deterministic_timing { 0.0 } else { r.latency },
                ..r.clone()
            });
        }
    }
    Ok((records, ledger))
}

/// Runs the full grid over the given datasets. `llm` must be present when
/// the method roster includes the LLM path.
pub fn run_benchmark(
    datasets: &[Dataset],
    cfg: &RunConfig,
    llm: Option<&LlmContext>,
) -> Result<BenchOutput> {
    cfg.validate()?;
    if datasets.is_empty() {
        return Err(Error::Config("no datasets selected".into()));
    }
    let wants_llm = cfg.methods.contains(&BenchMethod::Llm);
    if wants_llm && llm.is_none() {
        return Err(Error::Config("llm method selected but no provider context given".into()));
    }
    let classical: Vec<Method> = cfg
        .methods
        .iter()
        .filter_map(|m| match m {
            BenchMethod::Classical(m) => Some(*m),
            BenchMethod::Llm => None,
        })
        .collect();

    let mut out = BenchOutput::default();
    for data in datasets {
        let name = data.name().to_string();
        let folds_seed = derive_seed(cfg.master_seed, &["folds", &name]);
        for fold in 0..cfg.k_folds {
            let fctx = match build_fold_context(data, folds_seed, cfg.k_folds, fold) {
                Ok(f) => f,
                Err(e) => {
                    out.failures.push(CellFailure {
                        key: format!("{name}/f{fold}"),
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            let mut amps = Vec::new();
            for &mech in &cfg.mechanisms {
                for &rate in &cfg.rates {
                    match build_amp_context(&fctx, cfg.master_seed, &name, mech, rate) {
                        Ok(a) => amps.push(a),
                        Err(e) => out.failures.push(CellFailure {
                            key: cell_key(&name, mech, rate, fold, "*"),
                            message: e.to_string(),
                        }),
                    }
                }
            }

            let mut cells: Vec<(&AmpContext, Method)> = Vec::new();
            for amp in &amps {
                for &method in &classical {
                    cells.push((amp, method));
                }
            }
            let results: Vec<_> = cells
                .par_iter()
                .map(|(amp, method)| {
                    classical_cell(&name, &fctx, amp, *method, cfg).map_err(|e| CellFailure {
                        key: cell_key(&name, amp.mechanism, amp.rate, fold, method.as_str()),
                        message: e.to_string(),
                    })
                })
                .collect();
            for result in results {
                match result {
                    Ok(records) => out.records.extend(records),
                    Err(failure) => out.failures.push(failure),
                }
            }

            if wants_llm {
                let llm = llm.expect("checked above");
                for amp in &amps {
                    match llm_cell(&name, &fctx, amp, cfg, llm) {
                        Ok((records, ledger)) => {
                            out.records.extend(records);
                            out.ledger.merge(ledger);
                        }
                        Err(e) => out.failures.push(CellFailure {
                            key: cell_key(&name, amp.mechanism, amp.rate, fold, "llm"),
                            message: e.to_string(),
                        }),
                    }
                }
            }
        }
    }
    out.records.sort_by(|a, b| {
        let (ad, am, ar, ame, af, ap) = a.sort_key();
        let (bd, bm, br, bme, bf, bp) = b.sort_key();
        (ad, am, ame, af, ap)
            .cmp(&(bd, bm, bme, bf, bp))
            .then(ar.total_cmp(&br))
    });
    out.failures.sort_by(|a, b| a.key.cmp(&b.key).then(a.message.cmp(&b.message)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{MockProvider, MockScript};
    use crate::synthgen::{generate_classification, FeatureMix, SynthSpec};
    use crate::tabular::{Cell, FeatureSchema};

    fn small_dataset(name: &str, rows: usize) -> Dataset {
        let spec = SynthSpec {
            name: name.into(),
            n_samples: rows,
            n_features: 4,
            n_informative: 3,
            n_repeated: 0,
            n_clusters_per_class: 1,
            class_sep: 1.0,
            n_classes: 2,
            feature_mix: FeatureMix::Continuous,
            seed: 9,
        };
        generate_classification(&spec).unwrap()
    }

    fn mock_profile() -> ProviderProfile {
        ProviderProfile {
            model_id: "Mock".into(),
            api_string: "mock".into(),
            price_in: 1.0,
            price_out: 2.0,
            temperature: 0.1,
            tools_enabled: false,
            endpoint: None,
            api_key_env: None,
            wire: None,
        }
    }

    #[test]
    fn grid_cardinality_matches_the_cross_product() {
        let data = small_dataset("grid", 80);
        let mut cfg = RunConfig::new(5);
        cfg.methods = vec![BenchMethod::Classical(Method::Mean), BenchMethod::Classical(Method::Knn)];
        cfg.deterministic_timing = true;
        let out = run_benchmark(&[data], &cfg, None).unwrap();
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        // 3 mechanisms x 3 rates x 5 folds x 2 methods x 2 partitions.
        assert_eq!(out.records.len(), 180);
        let test_only = out.records.iter().filter(|r| r.partition == Partition::Test).count();
        assert_eq!(test_only, 90);
        assert!(out.records.iter().all(|r| r.nrmse >= 0.0 && r.runtime == 0.0 && r.cost == 0.0));
    }

    #[test]
    fn rerun_with_same_master_seed_is_identical() {
        let data = small_dataset("rerun", 60);
        let mut cfg = RunConfig::new(11);
        cfg.methods = vec![BenchMethod::Classical(Method::Mean)];
        cfg.rates = vec![0.1];
        cfg.deterministic_timing = true;
        let a = run_benchmark(&[data.clone()], &cfg, None).unwrap();
        let b = run_benchmark(&[data], &cfg, None).unwrap();
        assert_eq!(a.records, b.records);
        let mut other = cfg.clone();
        other.master_seed = 12;
        let c = run_benchmark(&[small_dataset("rerun", 60)], &other, None).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn records_come_out_sorted_by_cell_key() {
        let data = small_dataset("sorted", 60);
        let mut cfg = RunConfig::new(3);
        cfg.methods = vec![BenchMethod::Classical(Method::Knn), BenchMethod::Classical(Method::Mean)];
        cfg.rates = vec![0.2, 0.05];
        cfg.mechanisms = vec![Mechanism::Mnar, Mechanism::Mcar];
        cfg.k_folds = 2;
        cfg.deterministic_timing = true;
        let out = run_benchmark(&[data], &cfg, None).unwrap();
        let mut sorted = out.records.clone();
        sorted.sort_by(|a, b| {
            let (ad, am, ar, ame, af, ap) = a.sort_key();
            let (bd, bm, br, bme, bf, bp) = b.sort_key();
            (ad, am, ame, af, ap).cmp(&(bd, bm, bme, bf, bp)).then(ar.total_cmp(&br))
        });
        assert_eq!(out.records, sorted);
    }

    #[test]
    fn llm_cells_run_through_the_mock_transport() {
        let data = small_dataset("mockrun", 40);
        let mut cfg = RunConfig::new(21);
        cfg.methods = vec![BenchMethod::Llm];
        cfg.mechanisms = vec![Mechanism::Mcar];
        cfg.rates = vec![0.1];
        cfg.k_folds = 2;
        cfg.deterministic_timing = true;
        let profile = mock_profile();
        let transport = MockProvider::new(MockScript::parse("valid", 0).unwrap());
        let llm = LlmContext { profile: &profile, policy: RetryPolicy::zero_delay(), transport: &transport };
        let out = run_benchmark(&[data], &cfg, Some(&llm)).unwrap();
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        // 1 mechanism x 1 rate x 2 folds x 2 partitions.
        assert_eq!(out.records.len(), 4);
        assert!(out.records.iter().all(|r| r.method == "llm" && r.fallback_count == 0));
        assert!(out.ledger.total_batches() >= 4);
        assert!(out.records.iter().all(|r| r.cost > 0.0), "nonzero prices meter to nonzero cost");
        assert!(out.ledger.records().iter().all(|r| r.latency == 0.0));
    }

    #[test]
    fn llm_method_without_context_is_rejected() {
        let data = small_dataset("noctx", 40);
        let mut cfg = RunConfig::new(2);
        cfg.methods = vec![BenchMethod::Llm];
        let err = run_benchmark(&[data], &cfg, None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn degenerate_column_fails_the_cell_not_the_grid() {
        // A constant feature survives amputation and imputation but cannot
        // be range-scored; MNAR's per-feature quota guarantees it is hit.
        let schema = vec![
            FeatureSchema::continuous("x"),
            FeatureSchema::continuous("flat"),
            FeatureSchema::categorical("label", vec!["a".into(), "b".into()]).into_target(),
        ];
        let rows: Vec<Vec<Option<Cell>>> = (0..40)
            .map(|i| {
                vec![
                    Some(Cell::Num(i as f64)),
                    Some(Cell::Num(5.0)),
                    Some(Cell::Cat((i % 2) as u32)),
                ]
            })
            .collect();
        let data = Dataset::from_rows("flatcase", schema, rows).unwrap();
        let mut cfg = RunConfig::new(7);
        cfg.methods = vec![BenchMethod::Classical(Method::Mean)];
        cfg.mechanisms = vec![Mechanism::Mnar];
        cfg.rates = vec![0.2];
        cfg.k_folds = 2;
        cfg.deterministic_timing = true;
        let out = run_benchmark(&[data], &cfg, None).unwrap();
        assert_eq!(out.records.len(), 0);
        assert_eq!(out.failures.len(), 2, "{:?}", out.failures);
        assert!(out.failures.iter().all(|f| f.message.contains("degenerate range")));
        assert!(out.failures[0].key.starts_with("flatcase/MNAR/r0.2/f0/"));
    }

    #[test]
    fn bench_method_strings_round_trip() {
        for s in ["mean", "knn", "mice", "softimpute", "missforest", "llm"] {
            assert_eq!(s.parse::<BenchMethod>().unwrap().as_str(), s);
        }
        assert!("bogus".parse::<BenchMethod>().is_err());
    }

    #[test]
    fn invalid_configs_are_rejected_up_front() {
        let data = small_dataset("cfg", 40);
        let mut cfg = RunConfig::new(1);
        cfg.rates = vec![1.5];
        assert!(run_benchmark(&[data.clone()], &cfg, None).is_err());
        let mut cfg = RunConfig::new(1);
        cfg.methods.clear();
        assert!(run_benchmark(&[data.clone()], &cfg, None).is_err());
        let cfg = RunConfig::new(1);
        assert!(run_benchmark(&[], &cfg, None).is_err());
    }
}
