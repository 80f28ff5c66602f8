//! Aggregation and artifact emission: rate tables, rank tables, Pareto
//! flags, fallback percentages, and the CSV/manifest bundle.
//!
//! Every emitter is a pure function of its inputs and writes fields with
//! shortest-round-trip float formatting, so re-emitting identical inputs
//! produces byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bench::runner::{BenchOutput, EvalRecord, Partition};
use crate::error::{Error, Result};
use crate::llm::UsageLedger;

/// Best / second-best marker within one (mechanism, rate) column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Best,
    Second,
}

impl Marker {
    pub fn as_str(self) -> &'static str {
        match self {
            Marker::Best => "best",
            Marker::Second => "second",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCell {
    pub mechanism: String,
    pub rate: f64,
    pub method: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub marker: Option<Marker>,
}

fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and sample standard deviation of test-partition NRMSE per
/// (mechanism, rate, method), with best and second-best methods marked
/// within each (mechanism, rate) group. Returns the cells plus flags naming
/// (mechanism, rate, method) combinations that had no records.
pub fn aggregate(records: &[EvalRecord]) -> (Vec<AggregateCell>, Vec<String>) {
    let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    let mut methods: BTreeSet<String> = BTreeSet::new();
    for r in records.iter().filter(|r| r.partition == Partition::Test) {
        let rate_s = format!("{}", r.rate);
        groups
            .entry((r.mechanism.as_str().to_string(), rate_s, r.method.clone()))
            .or_default()
            .push(r.nrmse);
        methods.insert(r.method.clone());
    }
    let mut cells: Vec<AggregateCell> = Vec::new();
    let mut flags = Vec::new();
    let combos: BTreeSet<(String, String)> =
        groups.keys().map(|(m, r, _)| (m.clone(), r.clone())).collect();
    for (mech, rate_s) in &combos {
        let mut column: Vec<AggregateCell> = Vec::new();
        for method in &methods {
            match groups.get(&(mech.clone(), rate_s.clone(), method.clone())) {
                Some(scores) => {
                    let (mean, std) = mean_and_sample_std(scores);
                    column.push(AggregateCell {
                        mechanism: mech.clone(),
                        rate: rate_s.parse().expect("rate string round-trips"),
                        method: method.clone(),
                        mean,
                        std,
                        n: scores.len(),
                        marker: None,
                    });
                }
                None => flags.push(format!("no records for {mech}/r{rate_s}/{method}")),
            }
        }
        let mut order: Vec<usize> = (0..column.len()).collect();
        order.sort_by(|&a, &b| column[a].mean.total_cmp(&column[b].mean));
        if let Some(&best) = order.first() {
            column[best].marker = Some(Marker::Best);
        }
        if let Some(&second) = order.get(1) {
            column[second].marker = Some(Marker::Second);
        }
        cells.extend(column);
    }
    (cells, flags)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRank {
    pub method: String,
    pub mean_rank: f64,
    /// Number of complete cells the mean runs over.
    pub cells: usize,
}

/// Average-rank convention: within every complete (dataset, mechanism,
/// rate, fold) cell, methods are ranked ascending by test NRMSE with ties
/// averaged; a cell missing any method is excluded and flagged.
pub fn mean_ranks(records: &[EvalRecord]) -> (Vec<MethodRank>, Vec<String>) {
    let mut methods: BTreeSet<String> = BTreeSet::new();
    let mut cells: BTreeMap<(String, String, String, usize), BTreeMap<String, f64>> =
        BTreeMap::new();
    for r in records.iter().filter(|r| r.partition == Partition::Test) {
        methods.insert(r.method.clone());
        cells
            .entry((
                r.dataset.clone(),
                r.mechanism.as_str().to_string(),
                format!("{}", r.rate),
                r.fold,
            ))
            .or_default()
            .insert(r.method.clone(), r.nrmse);
    }
    let mut flags = Vec::new();
    let mut rank_sum: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for ((dataset, mech, rate_s, fold), scores) in &cells {
        if scores.len() != methods.len() {
            flags.push(format!(
                "cell {dataset}/{mech}/r{rate_s}/f{fold} has {} of {} methods; excluded from ranks",
                scores.len(),
                methods.len()
            ));
            continue;
        }
        let mut entries: Vec<(&String, f64)> = scores.iter().map(|(m, &s)| (m, s)).collect();
        entries.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut i = 0;
        while i < entries.len() {
            let mut j = i;
            while j + 1 < entries.len() && entries[j + 1].1 == entries[i].1 {
                j += 1;
            }
            // Positions i..=j share the average of ranks i+1..=j+1.
            let rank = (i + 1 + j + 1) as f64 / 2.0;
            for entry in &entries[i..=j] {
                let slot = rank_sum.entry(entry.0.clone()).or_insert((0.0, 0));
                slot.0 += rank;
                slot.1 += 1;
            }
            i = j + 1;
        }
    }
    let ranks = rank_sum
        .into_iter()
        .map(|(method, (sum, n))| MethodRank { method, mean_rank: sum / n as f64, cells: n })
        .collect();
    (ranks, flags)
}

/// Non-strict dominance flags: `true` at index i means no other point is
/// less than or equal in both coordinates and strictly less in at least one.
/// Duplicated points never dominate each other, so both stay flagged.
pub fn pareto_flags(points: &[(f64, f64)]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a].0.total_cmp(&points[b].0).then(points[a].1.total_cmp(&points[b].1))
    });
    let mut on_frontier = vec![true; points.len()];
    let mut left_min_y = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        // Group of equal x, ascending y.
        let mut j = i;
        while j + 1 < order.len() && points[order[j + 1]].0 == points[order[i]].0 {
            j += 1;
        }
        let group_min_y = points[order[i]].1;
        for &idx in &order[i..=j] {
            let y = points[idx].1;
            // Dominated from strictly left (x' < x, y' <= y) or from within
            // the column (x' = x, y' < y).
            if left_min_y <= y || group_min_y < y {
                on_frontier[idx] = false;
            }
        }
        left_min_y = left_min_y.min(group_min_y);
        i = j + 1;
    }
    on_frontier
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub dataset: String,
    pub method: String,
    pub nrmse: f64,
    pub runtime: f64,
    pub on_frontier: bool,
}

/// Per dataset, each method becomes one point (mean test NRMSE, mean
/// runtime) and the frontier is flagged within that dataset's point set.
pub fn pareto_points(records: &[EvalRecord]) -> Vec<ParetoPoint> {
    let mut groups: BTreeMap<(String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.partition == Partition::Test) {
        let entry = groups.entry((r.dataset.clone(), r.method.clone())).or_default();
        entry.0.push(r.nrmse);
        entry.1.push(r.runtime);
    }
    let mut points: Vec<ParetoPoint> = groups
        .into_iter()
        .map(|((dataset, method), (scores, runtimes))| ParetoPoint {
            dataset,
            method,
            nrmse: mean_and_sample_std(&scores).0,
            runtime: mean_and_sample_std(&runtimes).0,
            on_frontier: false,
        })
        .collect();
    let datasets: BTreeSet<String> = points.iter().map(|p| p.dataset.clone()).collect();
    for dataset in datasets {
        let idx: Vec<usize> =
            (0..points.len()).filter(|&i| points[i].dataset == dataset).collect();
        let coords: Vec<(f64, f64)> = idx.iter().map(|&i| (points[i].nrmse, points[i].runtime)).collect();
        for (&i, flag) in idx.iter().zip(pareto_flags(&coords)) {
            points[i].on_frontier = flag;
        }
    }
    points
}

#[derive(Debug, Clone, PartialEq)]
pub struct FallbackRow {
    pub label: String,
    pub fallbacks: usize,
    pub batches: usize,
}

impl FallbackRow {
    pub fn percent(&self) -> f64 {
        100.0 * self.fallbacks as f64 / self.batches as f64
    }

    /// Two-decimal rendering used in the emitted table.
    pub fn percent_text(&self) -> String {
        format!("{:.2}", self.percent())
    }
}

/// Fallback percentage per labeled ledger group; groups with zero batches
/// are omitted.
pub fn fallback_report(groups: &[(String, &UsageLedger)]) -> Vec<FallbackRow> {
    let mut rows: Vec<FallbackRow> = groups
        .iter()
        .filter(|(_, ledger)| ledger.total_batches() > 0)
        .map(|(label, ledger)| FallbackRow {
            label: label.clone(),
            fallbacks: ledger.fallback_count(),
            batches: ledger.total_batches(),
        })
        .collect();
    rows.sort_by(|a, b| a.label.cmp(&b.label));
    rows
}

/// Run configuration echo recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestInfo {
    pub master_seed: u64,
    pub k_folds: usize,
    pub datasets: Vec<String>,
    pub mechanisms: Vec<String>,
    pub rates: Vec<f64>,
    pub methods: Vec<String>,
    pub provider: Option<String>,
    pub deterministic_timing: bool,
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| Error::from(e).with_path(&path))?;
    Ok(path)
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn records_csv(records: &[EvalRecord]) -> String {
    let mut out = String::from(
        "dataset,mechanism,rate,method,fold,partition,nrmse,runtime,fallback_count,cost\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.dataset,
            r.mechanism.as_str(),
            fmt_f64(r.rate),
            r.method,
            r.fold,
            r.partition.as_str(),
            fmt_f64(r.nrmse),
            fmt_f64(r.runtime),
            r.fallback_count,
            fmt_f64(r.cost),
        ));
    }
    out
}

/// Parses a records.csv produced by [`records_csv`]; the `report`
/// subcommand rebuilds its tables from this.
pub fn read_records_csv<R: std::io::Read>(reader: R) -> Result<Vec<EvalRecord>> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut records = Vec::new();
    for (i, row) in csv.records().enumerate() {
        let row = row?;
        let field = |j: usize| -> Result<&str> {
            row.get(j).ok_or_else(|| {
                Error::Ingest(format!("records row {i} is missing field {j}"))
            })
        };
        let num = |j: usize| -> Result<f64> {
            field(j)?
                .parse()
                .map_err(|_| Error::Ingest(format!("records row {i}: bad number in field {j}")))
        };
        let partition = match field(5)? {
            "train" => Partition::Train,
            "test" => Partition::Test,
            other => {
                return Err(Error::Ingest(format!("records row {i}: bad partition '{other}'")))
            }
        };
        records.push(EvalRecord {
            dataset: field(0)?.to_string(),
            mechanism: field(1)?.parse()?,
            rate: num(2)?,
            method: field(3)?.to_string(),
            fold: num(4)? as usize,
            partition,
            nrmse: num(6)?,
            runtime: num(7)?,
            fallback_count: num(8)? as usize,
            cost: num(9)?,
        });
    }
    Ok(records)
}

fn aggregates_csv(cells: &[AggregateCell]) -> String {
    let mut out = String::from("mechanism,rate,method,mean_nrmse,std_nrmse,n,marker\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.mechanism,
            fmt_f64(c.rate),
            c.method,
            fmt_f64(c.mean),
            fmt_f64(c.std),
            c.n,
            c.marker.map_or("", Marker::as_str),
        ));
    }
    out
}

fn ranks_csv(ranks: &[MethodRank]) -> String {
    let mut out = String::from("method,mean_rank,cells\n");
    for r in ranks {
        out.push_str(&format!("{},{},{}\n", r.method, fmt_f64(r.mean_rank), r.cells));
    }
    out
}

fn pareto_csv(points: &[ParetoPoint]) -> String {
    let mut out = String::from("dataset,method,nrmse,runtime,on_frontier\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.dataset,
            p.method,
            fmt_f64(p.nrmse),
            fmt_f64(p.runtime),
            p.on_frontier,
        ));
    }
    out
}

fn fallback_csv(rows: &[FallbackRow]) -> String {
    let mut out = String::from("label,fallback_batches,total_batches,percent\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.label,
            r.fallbacks,
            r.batches,
            r.percent_text()
        ));
    }
    out
}

fn usage_csv(ledger: &UsageLedger) -> String {
    let mut out =
        String::from("batch_id,attempts,input_tokens,output_tokens,outcome,latency,approximate\n");
    for r in ledger.records() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.batch_id,
            r.attempts,
            r.input_tokens,
            r.output_tokens,
            r.outcome.as_str(),
            fmt_f64(r.latency),
            r.approximate,
        ));
    }
    out
}

/// Splits "dataset/..." batch ids into per-dataset ledgers so the fallback
/// table gets one row per dataset.
fn ledger_groups(ledger: &UsageLedger) -> Vec<(String, UsageLedger)> {
    let mut groups: BTreeMap<String, UsageLedger> = BTreeMap::new();
    for r in ledger.records() {
        let label = r.batch_id.split('/').next().unwrap_or("all").to_string();
        groups.entry(label).or_default().push(r.clone());
    }
    groups.into_iter().collect()
}

/// Writes records.csv, aggregates.csv, ranks.csv, pareto.csv, fallback.csv,
/// usage.csv, and manifest.json into `dir`. Emission is deterministic:
/// identical inputs give byte-identical files.
pub fn emit_report(out: &BenchOutput, info: &ManifestInfo, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).with_path(dir))?;
    let (cells, agg_flags) = aggregate(&out.records);
    let (ranks, rank_flags) = mean_ranks(&out.records);
    let points = pareto_points(&out.records);
    let owned_groups = ledger_groups(&out.ledger);
    let groups: Vec<(String, &UsageLedger)> =
        owned_groups.iter().map(|(l, g)| (l.clone(), g)).collect();
    let fallback = fallback_report(&groups);

    let mut paths = vec![
        write_file(dir, "records.csv", &records_csv(&out.records))?,
        write_file(dir, "aggregates.csv", &aggregates_csv(&cells))?,
        write_file(dir, "ranks.csv", &ranks_csv(&ranks))?,
        write_file(dir, "pareto.csv", &pareto_csv(&points))?,
        write_file(dir, "fallback.csv", &fallback_csv(&fallback))?,
        write_file(dir, "usage.csv", &usage_csv(&out.ledger))?,
    ];
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": info,
        "records": out.records.len(),
        "flags": agg_flags.iter().chain(&rank_flags).collect::<Vec<_>>(),
        "failures": out.failures.iter().map(|f| {
            serde_json::json!({ "cell": f.key, "message": f.message })
        }).collect::<Vec<_>>(),
    });
    paths.push(write_file(dir, "manifest.json", &format!("{:#}\n", manifest))?);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amputation::Mechanism;
    use crate::llm::{BatchOutcome, RequestRecord};

    fn record(
        dataset: &str,
        mech: Mechanism,
        rate: f64,
        method: &str,
        fold: usize,
        partition: Partition,
        nrmse: f64,
    ) -> EvalRecord {
        EvalRecord {
            dataset: dataset.into(),
            mechanism: mech,
            rate,
            method: method.into(),
            fold,
            partition,
            nrmse,
            runtime: 1.0,
            fallback_count: 0,
            cost: 0.0,
        }
    }

    #[test]
    fn aggregate_means_stds_and_markers() {
        let records = vec![
            record("d", Mechanism::Mcar, 0.1, "mean", 0, Partition::Test, 0.2),
            record("d", Mechanism::Mcar, 0.1, "mean", 1, Partition::Test, 0.4),
            record("d", Mechanism::Mcar, 0.1, "knn", 0, Partition::Test, 0.1),
            record("d", Mechanism::Mcar, 0.1, "knn", 1, Partition::Test, 0.1),
            record("d", Mechanism::Mcar, 0.1, "mice", 0, Partition::Test, 0.5),
            // Train rows must not leak into the table.
            record("d", Mechanism::Mcar, 0.1, "mice", 0, Partition::Train, 0.0),
        ];
        let (cells, flags) = aggregate(&records);
        assert!(flags.is_empty());
        assert_eq!(cells.len(), 3);
        let by_method = |m: &str| cells.iter().find(|c| c.method == m).unwrap();
        let mean = by_method("mean");
        assert!((mean.mean - 0.3).abs() < 1e-12);
        assert!((mean.std - (0.02f64 / 1.0).sqrt()).abs() < 1e-12, "sample std over two points");
        assert_eq!(mean.marker, Some(Marker::Second));
        assert_eq!(by_method("knn").marker, Some(Marker::Best));
        assert_eq!(by_method("knn").std, 0.0);
        assert_eq!(by_method("mice").marker, None);
        assert_eq!(by_method("mice").n, 1);
        assert_eq!(by_method("mice").std, 0.0, "singleton cell");
    }

    #[test]
    fn aggregate_flags_missing_method_cells() {
        let records = vec![
            record("d", Mechanism::Mcar, 0.1, "mean", 0, Partition::Test, 0.2),
            record("d", Mechanism::Mnar, 0.1, "mean", 0, Partition::Test, 0.2),
            record("d", Mechanism::Mcar, 0.1, "knn", 0, Partition::Test, 0.1),
        ];
        let (cells, flags) = aggregate(&records);
        assert_eq!(cells.len(), 3);
        assert_eq!(flags, vec!["no records for MNAR/r0.1/knn".to_string()]);
    }

    #[test]
    fn ranks_follow_the_average_rank_convention() {
        let mut records = Vec::new();
        // Cell 1: a < b < c -> ranks 1, 2, 3.
        for (m, s) in [("a", 0.1), ("b", 0.2), ("c", 0.3)] {
            records.push(record("d", Mechanism::Mcar, 0.1, m, 0, Partition::Test, s));
        }
        // Cell 2: a and b tie ahead of c -> ranks 1.5, 1.5, 3.
        for (m, s) in [("a", 0.2), ("b", 0.2), ("c", 0.9)] {
            records.push(record("d", Mechanism::Mcar, 0.1, m, 1, Partition::Test, s));
        }
        let (ranks, flags) = mean_ranks(&records);
        assert!(flags.is_empty());
        let by = |m: &str| ranks.iter().find(|r| r.method == m).unwrap();
        assert!((by("a").mean_rank - 1.25).abs() < 1e-12);
        assert!((by("b").mean_rank - 1.75).abs() < 1e-12);
        assert!((by("c").mean_rank - 3.0).abs() < 1e-12);
        // Rank sums per cell total m(m+1)/2.
        let total: f64 = ranks.iter().map(|r| r.mean_rank * r.cells as f64).sum();
        assert!((total - 2.0 * 6.0).abs() < 1e-12);
    }

    #[test]
    fn incomplete_rank_cells_are_excluded_and_flagged() {
        let records = vec![
            record("d", Mechanism::Mcar, 0.1, "a", 0, Partition::Test, 0.1),
            record("d", Mechanism::Mcar, 0.1, "b", 0, Partition::Test, 0.2),
            record("d", Mechanism::Mcar, 0.1, "a", 1, Partition::Test, 0.1),
        ];
        let (ranks, flags) = mean_ranks(&records);
        assert_eq!(flags.len(), 1);
        assert!(flags[0].contains("f1"), "{flags:?}");
        assert_eq!(ranks.iter().find(|r| r.method == "a").unwrap().cells, 1);
    }

    #[test]
    fn pareto_flags_match_the_worked_example() {
        let flags = pareto_flags(&[(0.2, 10.0), (0.3, 5.0), (0.25, 20.0)]);
        assert_eq!(flags, vec![true, true, false]);
        assert_eq!(pareto_flags(&[(1.0, 1.0)]), vec![true]);
        // Duplicates never dominate each other.
        assert_eq!(pareto_flags(&[(1.0, 1.0), (1.0, 1.0)]), vec![true, true]);
        // Equal on one axis, better on the other: dominated.
        assert_eq!(pareto_flags(&[(1.0, 1.0), (1.0, 2.0)]), vec![true, false]);
    }

    #[test]
    fn fallback_percentages_render_to_two_decimals() {
        let mut ledger = UsageLedger::new();
        for i in 0..174 {
            ledger.push(RequestRecord {
                batch_id: format!("d/w{i:03}"),
                attempts: 1,
                input_tokens: 10,
                output_tokens: 10,
                outcome: if i < 26 { BatchOutcome::Fallback } else { BatchOutcome::Accepted },
                latency: 0.0,
                approximate: false,
            });
        }
        let rows = fallback_report(&[("hepatitis".to_string(), &ledger)]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].fallbacks, 26);
        assert_eq!(rows[0].batches, 174);
        assert_eq!(rows[0].percent_text(), "14.94");
        let empty = UsageLedger::new();
        assert!(fallback_report(&[("none".to_string(), &empty)]).is_empty());
    }

    #[test]
    fn emitted_reports_are_byte_identical_on_reemission() {
        let records = vec![
            record("d", Mechanism::Mcar, 0.05, "mean", 0, Partition::Test, 0.25),
            record("d", Mechanism::Mcar, 0.05, "mean", 0, Partition::Train, 0.2),
            record("d", Mechanism::Mar, 0.05, "mean", 0, Partition::Test, 0.3),
        ];
        let mut ledger = UsageLedger::new();
        ledger.push(RequestRecord {
            batch_id: "d/MCAR/r0.05/f0/train/w000".into(),
            attempts: 2,
            input_tokens: 100,
            output_tokens: 50,
            outcome: BatchOutcome::Accepted,
            latency: 0.0,
            approximate: true,
        });
        let out = BenchOutput { records, ledger, failures: vec![] };
        let info = ManifestInfo {
            master_seed: 7,
            k_folds: 5,
            datasets: vec!["d".into()],
            mechanisms: vec!["MCAR".into(), "MAR".into()],
            rates: vec![0.05],
            methods: vec!["mean".into()],
            provider: None,
            deterministic_timing: true,
        };
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let paths_a = emit_report(&out, &info, dir_a.path()).unwrap();
        let paths_b = emit_report(&out, &info, dir_b.path()).unwrap();
        assert_eq!(paths_a.len(), 7);
        for (a, b) in paths_a.iter().zip(&paths_b) {
            assert_eq!(
                std::fs::read(a).unwrap(),
                std::fs::read(b).unwrap(),
                "{} differs",
                a.display()
            );
        }
        let records_body = std::fs::read_to_string(&paths_a[0]).unwrap();
        assert_eq!(records_body.lines().count(), 4, "header plus one line per record");
    }

    #[test]
    fn records_csv_round_trips_through_the_reader() {
        let records = vec![
            record("iris", Mechanism::Mnar, 0.2, "knn", 3, Partition::Test, 0.125),
            record("iris", Mechanism::Mar, 0.05, "llm", 1, Partition::Train, 0.5),
        ];
        let body = records_csv(&records);
        let back = read_records_csv(body.as_bytes()).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn empty_run_emits_headers_and_manifest() {
        let out = BenchOutput::default();
        let info = ManifestInfo {
            master_seed: 0,
            k_folds: 5,
            datasets: vec![],
            mechanisms: vec![],
            rates: vec![],
            methods: vec![],
            provider: None,
            deterministic_timing: false,
        };
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&out, &info, dir.path()).unwrap();
        assert_eq!(paths.len(), 7);
        for p in &paths[..6] {
            let body = std::fs::read_to_string(p).unwrap();
            assert_eq!(body.lines().count(), 1, "{} should be header-only", p.display());
        }
    }
}
