use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "cpiseq", version, about = "Conditional feature importance for mixed tabular data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and score feature importance on a CSV dataset.
    Analyze(AnalyzeArgs),
    /// Write a simulated dataset with its ground truth.
    Simulate(SimulateArgs),
    /// Run simulation replicates and summarize them.
    Benchmark(BenchmarkArgs),
    /// Compare a knockoff copy with the original features.
    KnockoffDiagnostics(DiagnosticsArgs),
    /// Download a file, optionally verifying its SHA-256.
    Fetch(FetchArgs),
}

/// Field-wise `a.or(b)` for structs of options.
macro_rules! merge_fields {
    ($a:expr, $b:expr; $($f:ident),* $(,)?) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f.take(); } )*
    };
}

pub trait Mergeable: Sized + Default + Serialize + DeserializeOwned {
    fn config_path(&self) -> Option<&Path>;
    /// Fills unset fields from `file`.
    fn merge(&mut self, file: Self);

    /// Applies the config file, if any; explicit flags win.
    fn resolve(mut self) -> CliResult<Self> {
        if let Some(path) = self.config_path() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
            check_keys::<Self>(&value)?;
            let file: Self = serde_json::from_value(value)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
            self.merge(file);
        }
        Ok(self)
    }
}

fn check_keys<T: Default + Serialize>(value: &serde_json::Value) -> CliResult<()> {
    let known = serde_json::to_value(T::default()).expect("serializable defaults");
    let (Some(known), Some(given)) = (known.as_object(), value.as_object()) else {
        return Err(CliError::Usage("config file must hold a JSON object".into()));
    };
    if let Some(k) = given.keys().find(|k| !known.contains_key(*k)) {
        return Err(CliError::Usage(format!("unknown config key `{k}`")));
    }
    Ok(())
}

/// Model and method settings shared by `analyze` and `benchmark`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct AnalysisOpts {
    /// `rf`, `rf(trees=500,mtry=2,min_node=5)`, `linear`, `logistic` or `glm`.
    #[arg(long)]
    pub learner: Option<String>,
    /// `mse` or `logloss`; task default when omitted.
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Elastic-net mixing for the sequential sampler (1 = lasso).
    #[arg(long)]
    pub enet_alpha: Option<f64>,
    #[arg(long)]
    pub n_lambda: Option<usize>,
    #[arg(long)]
    pub lambda_min_ratio: Option<f64>,
    #[arg(long)]
    pub cv_folds: Option<usize>,
    #[arg(long)]
    pub n_permutations: Option<usize>,
    /// `knockoff-minus-original` (default) or `original-minus-knockoff`.
    #[arg(long)]
    pub delta_orientation: Option<String>,
}

impl AnalysisOpts {
    fn merge(&mut self, mut f: Self) {
        merge_fields!(self, f; learner, loss, alpha, train_fraction, enet_alpha, n_lambda,
            lambda_min_ratio, cv_folds, n_permutations, delta_orientation);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct AnalyzeArgs {
    /// JSON file with any of these options; flags override it.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// `cpi-seq`, `cpi-gauss`, `pfi` or `loco`.
    #[arg(long)]
    pub method: Option<String>,
    /// Feature group `id=col1,col2`; repeatable. One group per column by default.
    #[arg(long = "group")]
    pub groups: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// JSON results (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat CSV results.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub analysis: AnalysisOpts,
}

impl Mergeable for AnalyzeArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
    fn merge(&mut self, mut f: Self) {
        merge_fields!(self, f; data, schema, target, method, groups, seed, workers, out, csv);
        self.analysis.merge(f.analysis);
    }
}

/// Scenario settings shared by `simulate` and `benchmark`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ScenarioOpts {
    /// `dag` or `grid`.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// DAG effect size.
    #[arg(long)]
    pub beta: Option<f64>,
    /// DAG variable kinds: `gaussian`, `mixed`, `classification`, or four
    /// comma-separated kinds such as `cat10,cont,cat10,cont`.
    #[arg(long)]
    pub kinds: Option<String>,
    /// Grid within-pair correlation.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Level count of categorical variables.
    #[arg(long = "c")]
    pub cardinality: Option<usize>,
    /// `regression` or `classification`.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub ber: Option<f64>,
}

impl ScenarioOpts {
    fn merge(&mut self, mut f: Self) {
        merge_fields!(self, f; scenario, n, beta, kinds, rho, cardinality, target, snr, ber);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub scenario: ScenarioOpts,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for data.csv, schema.json and truth.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl Mergeable for SimulateArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
    fn merge(&mut self, mut f: Self) {
        merge_fields!(self, f; seed, out_dir);
        self.scenario.merge(f.scenario);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct BenchmarkArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub scenario: ScenarioOpts,
    /// Sample sizes; overrides `--n`.
    #[arg(long = "n-list", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Summary CSV (long format).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-replicate CSV, appended to and resumed from.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    /// Top-k size for detection rates; number of relevant features by default.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub analysis: AnalysisOpts,
}

impl Mergeable for BenchmarkArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
    fn merge(&mut self, mut f: Self) {
        merge_fields!(self, f; n_list, methods, replicates, seed, workers, out, raw, top_k);
        self.scenario.merge(f.scenario);
        self.analysis.merge(f.analysis);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct DiagnosticsArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Column to leave out of the features.
    #[arg(long)]
    pub target: Option<String>,
    /// `sequential` or `gaussian`.
    #[arg(long)]
    pub sampler: Option<String>,
    /// Discrepancies above this are flagged.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Mergeable for DiagnosticsArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
    fn merge(&mut self, mut f: Self) {
        merge_fields!(self, f; data, schema, target, sampler, threshold, seed, out);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct FetchArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub url: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Expected hex SHA-256 of the payload.
    #[arg(long)]
    pub sha256: Option<String>,
}

impl Mergeable for FetchArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
    fn merge(&mut self, mut f: Self) {
        merge_fields!(self, f; url, out, sha256);
    }
}

pub fn required<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}
