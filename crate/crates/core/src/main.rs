//! Command-line front end: synthetic-suite export, grid runs from a config
//! file, and report regeneration from a records table.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use impute_bench::amputation::Mechanism;
use impute_bench::bench::{
    emit_report, run_benchmark, BenchMethod, BenchOutput, LlmContext, ManifestInfo, RunConfig,
};
use impute_bench::llm::RetryPolicy;
use impute_bench::providers::{HttpProvider, MockProvider, MockScript, ProviderProfile, Transport};
use impute_bench::synthgen::{export_suite, generate_classification, suite_specs};
use impute_bench::tabular::{load_csv, Dataset};
use impute_bench::{Error, Result};

#[derive(Parser)]
#[command(
    name = "impute-bench",
    version,
    about = "Benchmark harness for missing-data imputation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic dataset suite as CSVs plus a manifest.
    Synth {
        /// Master seed; the suite regenerates bit-identically from it.
        #[arg(long)]
        seed: u64,
        /// Output directory, created if absent.
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute the benchmark grid described by a config file.
    Run {
        /// Run description, .toml or .json.
        #[arg(long)]
        config: PathBuf,
        /// Transport override; "mock" replays a scripted provider offline.
        #[arg(long)]
        provider: Option<String>,
        /// Behavior script for the mock transport, one token per line.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Restrict the method roster, e.g. mean,knn,mice,llm.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Report directory override.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild aggregate, rank, and Pareto tables from a records.csv.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn default_k_folds() -> usize {
    5
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("reports")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    master_seed: u64,
    #[serde(default = "default_k_folds")]
    k_folds: usize,
    /// Empty means all three mechanisms.
    #[serde(default)]
    mechanisms: Vec<String>,
    /// Empty means 0.05, 0.10, 0.20.
    #[serde(default)]
    rates: Vec<f64>,
    /// Empty means the five classical methods.
    #[serde(default)]
    methods: Vec<String>,
    #[serde(default)]
    deterministic_timing: bool,
    #[serde(default = "default_out_dir")]
    out_dir: PathBuf,
    #[serde(default)]
    provider: Option<ProviderSection>,
    dataset: Vec<DatasetSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProviderSection {
    /// "mock" or "http".
    #[serde(default)]
    kind: Option<String>,
    /// Builtin api string or a path to a profile file.
    #[serde(default)]
    profile: Option<String>,
    /// Mock behavior script path.
    #[serde(default)]
    script: Option<PathBuf>,
    /// Seed for the mock's cell-corruption draws.
    #[serde(default)]
    mock_seed: u64,
}

/// One dataset: a synthetic-suite name, or a CSV path with optional rename.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetSection {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    path: Option<PathBuf>,
}

fn load_run_file(path: &Path) -> Result<RunFile> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::from(e).with_path(path))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => Ok(toml::from_str(&raw)?),
        Some("json") => Ok(serde_json::from_str(&raw)?),
        other => Err(Error::Config(format!(
            "run config {} must be .toml or .json, got {:?}",
            path.display(),
            other
        ))),
    }
}

fn resolve_datasets(sections: &[DatasetSection], master_seed: u64) -> Result<Vec<Dataset>> {
    let specs = suite_specs(master_seed)?;
    let mut datasets = Vec::new();
    for section in sections {
        let data = match (&section.path, &section.name) {
            (Some(path), name) => {
                let loaded = load_csv(path, None)?;
                match name {
                    Some(n) => loaded.renamed(n),
                    None => loaded,
                }
            }
            (None, Some(name)) => {
                let spec = specs.iter().find(|s| &s.name == name).ok_or_else(|| {
                    Error::Config(format!(
                        "dataset '{name}' is not in the synthetic suite and has no path"
                    ))
                })?;
                generate_classification(spec)?
            }
            (None, None) => {
                return Err(Error::Config("dataset entry needs a name or a path".into()))
            }
        };
        datasets.push(data);
    }
    Ok(datasets)
}

fn zero_price_mock_profile() -> ProviderProfile {
    ProviderProfile {
        model_id: "Mock".into(),
        api_string: "mock".into(),
        price_in: 0.0,
        price_out: 0.0,
        temperature: 0.1,
        tools_enabled: false,
        endpoint: None,
        api_key_env: None,
        wire: None,
    }
}

fn resolve_profile(spec: Option<&str>) -> Result<ProviderProfile> {
    match spec {
        None => Ok(zero_price_mock_profile()),
        Some(s) => match ProviderProfile::builtin(s) {
            Some(profile) => Ok(profile),
            None => ProviderProfile::load(Path::new(s)),
        },
    }
}

struct ProviderSetup {
    profile: ProviderProfile,
    transport: Box<dyn Transport>,
    policy: RetryPolicy,
}

fn build_provider(
    section: Option<&ProviderSection>,
    kind_override: Option<&str>,
    script_override: Option<&Path>,
) -> Result<ProviderSetup> {
    let kind = kind_override
        .map(str::to_string)
        .or_else(|| section.and_then(|s| s.kind.clone()))
        .unwrap_or_else(|| "mock".into());
    let profile = resolve_profile(section.and_then(|s| s.profile.as_deref()))?;
    match kind.as_str() {
        "mock" => {
            let seed = section.map_or(0, |s| s.mock_seed);
            let script = match script_override.or(section.and_then(|s| s.script.as_deref())) {
                Some(path) => MockScript::from_file(path, seed)?,
                None => MockScript::parse("valid", seed)?,
            };
            Ok(ProviderSetup {
                profile,
                transport: Box::new(MockProvider::new(script)),
                // Scripted runs replay instantly; waiting adds nothing.
                policy: RetryPolicy::zero_delay(),
            })
        }
        "http" => {
            let timeout = std::time::Duration::from_secs(120);
            let transport = Box::new(HttpProvider::new(profile.clone(), timeout)?);
            Ok(ProviderSetup { profile, transport, policy: RetryPolicy::default() })
        }
        other => Err(Error::Config(format!("unknown provider kind '{other}'"))),
    }
}

fn run_command(
    config: &Path,
    provider_override: Option<&str>,
    script_override: Option<&Path>,
    methods_override: Option<&[String]>,
    out_override: Option<&Path>,
) -> Result<ExitCode> {
    let file = load_run_file(config)?;
    let mut cfg = RunConfig::new(file.master_seed);
    cfg.k_folds = file.k_folds;
    cfg.deterministic_timing = file.deterministic_timing;
    if !file.mechanisms.is_empty() {
        cfg.mechanisms = file
            .mechanisms
            .iter()
            .map(|s| s.parse::<Mechanism>())
            .collect::<Result<_>>()?;
    }
    if !file.rates.is_empty() {
        cfg.rates = file.rates.clone();
    }
    let method_names: Option<&[String]> = methods_override.or(if file.methods.is_empty() {
        None
    } else {
        Some(&file.methods)
    });
    if let Some(names) = method_names {
        cfg.methods = names.iter().map(|s| s.parse::<BenchMethod>()).collect::<Result<_>>()?;
    }

    let datasets = resolve_datasets(&file.dataset, cfg.master_seed)?;
    let wants_llm = cfg.methods.contains(&BenchMethod::Llm);
    let provider = if wants_llm {
        Some(build_provider(file.provider.as_ref(), provider_override, script_override)?)
    } else {
        None
    };
    let llm_ctx = provider.as_ref().map(|p| LlmContext {
        profile: &p.profile,
        policy: p.policy,
        transport: p.transport.as_ref(),
    });

    let output = run_benchmark(&datasets, &cfg, llm_ctx.as_ref())?;

    let out_dir = out_override.map(Path::to_path_buf).unwrap_or(file.out_dir);
    let info = ManifestInfo {
        master_seed: cfg.master_seed,
        k_folds: cfg.k_folds,
        datasets: datasets.iter().map(|d| d.name().to_string()).collect(),
        mechanisms: cfg.mechanisms.iter().map(|m| m.as_str().to_string()).collect(),
        rates: cfg.rates.clone(),
        methods: cfg.methods.iter().map(|m| m.as_str().to_string()).collect(),
        provider: provider.as_ref().map(|p| p.profile.api_string.clone()),
        deterministic_timing: cfg.deterministic_timing,
    };
    let paths = emit_report(&output, &info, &out_dir)?;
    println!(
        "wrote {} report files to {} ({} records, {} skipped cells)",
        paths.len(),
        out_dir.display(),
        output.records.len(),
        output.failures.len()
    );
    if output.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for failure in &output.failures {
            eprintln!("skipped {}: {}", failure.key, failure.message);
        }
        Ok(ExitCode::from(2))
    }
}

fn report_command(records_path: &Path, out_dir: &Path) -> Result<ExitCode> {
    let file =
        std::fs::File::open(records_path).map_err(|e| Error::from(e).with_path(records_path))?;
    let records = impute_bench::bench::read_records_csv(file)?;
    let mut datasets: Vec<String> = records.iter().map(|r| r.dataset.clone()).collect();
    datasets.sort();
    datasets.dedup();
    let mut methods: Vec<String> = records.iter().map(|r| r.method.clone()).collect();
    methods.sort();
    methods.dedup();
    let info = ManifestInfo {
        master_seed: 0,
        k_folds: 0,
        datasets,
        mechanisms: vec![],
        rates: vec![],
        methods,
        provider: None,
        deterministic_timing: false,
    };
    let output = BenchOutput { records, ..BenchOutput::default() };
    let paths = emit_report(&output, &info, out_dir)?;
    println!("rebuilt {} report files in {}", paths.len(), out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Synth { seed, out } => {
            let paths = export_suite(seed, &out)?;
            println!("wrote {} files to {}", paths.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, provider, script, methods, out } => run_command(
            &config,
            provider.as_deref(),
            script.as_deref(),
            methods.as_deref(),
            out.as_deref(),
        ),
        Command::Report { records, out } => report_command(&records, &out),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
