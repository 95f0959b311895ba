pub mod analyze;
pub mod benchmark;
pub mod diagnostics;
pub mod fetch;
pub mod simulate;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use cpiseq::cpi::{DeltaOrientation, FeatureGroup};
use cpiseq::experiment::{AnalysisConfig, Scenario};
use cpiseq::learners::{LearnerSpec, LossKind};
use cpiseq::simgen::{DagScenarioConfig, GridScenarioConfig, TargetType, VarKind};
use cpiseq::tabular::{read_csv, read_schema_json, Dataset};
use serde::Serialize;

use crate::args::{AnalysisOpts, ScenarioOpts};
use crate::error::{CliError, CliResult};

pub fn analysis_config(o: &AnalysisOpts) -> CliResult<AnalysisConfig> {
    let mut cfg = AnalysisConfig::default();
    if let Some(l) = &o.learner {
        cfg.learner = l.parse::<LearnerSpec>()?;
    }
    if let Some(l) = &o.loss {
        cfg.loss = Some(l.parse::<LossKind>()?);
    }
    if let Some(a) = o.alpha {
        if !(a > 0.0 && a < 1.0) {
            return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {a}")));
        }
        cfg.alpha = a;
    }
    if let Some(f) = o.train_fraction {
        if !(f > 0.0 && f < 1.0) {
            return Err(CliError::Usage(format!("--train-fraction must lie in (0, 1), got {f}")));
        }
        cfg.train_fraction = f;
    }
    let pen = &mut cfg.sequential.penalty;
    if let Some(a) = o.enet_alpha {
        pen.alpha = a;
    }
    if let Some(k) = o.n_lambda {
        pen.n_lambda = k;
    }
    if let Some(r) = o.lambda_min_ratio {
        pen.lambda_min_ratio = r;
    }
    if let Some(k) = o.cv_folds {
        pen.n_folds = k;
    }
    pen.validate()?;
    if let Some(k) = o.n_permutations {
        if k == 0 {
            return Err(CliError::Usage("--n-permutations must be at least 1".into()));
        }
        cfg.n_permutations = k;
    }
    if let Some(d) = &o.delta_orientation {
        cfg.orientation = parse_orientation(d)?;
    }
    Ok(cfg)
}

fn parse_orientation(s: &str) -> CliResult<DeltaOrientation> {
    let key = s.trim().to_ascii_lowercase().replace('-', "_");
    serde_json::from_value(serde_json::Value::String(key))
        .map_err(|_| CliError::Usage(format!("unknown delta orientation `{s}`")))
}

/// Parses `id=a,b` (or a bare column name).
pub fn parse_group(s: &str) -> CliResult<FeatureGroup> {
    let (id, cols) = match s.split_once('=') {
        Some((id, cols)) => (id.trim(), cols),
        None => (s.trim(), s),
    };
    let cols: Vec<&str> = cols.split(',').map(str::trim).filter(|c| !c.is_empty()).collect();
    if id.is_empty() || cols.is_empty() {
        return Err(CliError::Usage(format!("bad group `{s}`; expected id=col1,col2")));
    }
    Ok(FeatureGroup::new(id, cols))
}

fn parse_target_type(s: Option<&str>) -> CliResult<Option<TargetType>> {
    match s.map(|s| s.trim().to_ascii_lowercase()) {
        None => Ok(None),
        Some(t) if t == "regression" => Ok(Some(TargetType::Regression)),
        Some(t) if t == "classification" => Ok(Some(TargetType::Classification)),
        Some(t) => Err(CliError::Usage(format!("unknown target type `{t}`"))),
    }
}

fn parse_kind(s: &str, c: usize) -> CliResult<VarKind> {
    let s = s.trim().to_ascii_lowercase();
    match s.as_str() {
        "cont" | "continuous" | "gaussian" => Ok(VarKind::Continuous),
        "cat" | "categorical" => Ok(VarKind::Categorical(c)),
        other => other
            .strip_prefix("cat")
            .and_then(|k| k.parse().ok())
            .map(VarKind::Categorical)
            .ok_or_else(|| CliError::Usage(format!("unknown variable kind `{other}`"))),
    }
}

pub const DEFAULT_N: usize = 1000;

/// Builds the scenario from options; `n` falls back to [`DEFAULT_N`].
pub fn scenario(o: &ScenarioOpts) -> CliResult<Scenario> {
    let n = o.n.unwrap_or(DEFAULT_N);
    let target = parse_target_type(o.target.as_deref())?;
    let sc = match o.scenario.as_deref().unwrap_or("dag") {
        "dag" => {
            let c = o.cardinality.unwrap_or(10);
            let mut cfg = match o.kinds.as_deref().unwrap_or("gaussian") {
                "gaussian" => DagScenarioConfig::gaussian(n, 0.5),
                "mixed" => DagScenarioConfig::mixed(n, 0.5, c),
                "classification" => DagScenarioConfig::classification(n),
                list => {
                    let kinds = list.split(',').map(|k| parse_kind(k, c)).collect::<CliResult<Vec<_>>>()?;
                    let kinds: [VarKind; 4] = kinds.try_into().map_err(|_| {
                        CliError::Usage(format!("--kinds needs four entries, got `{list}`"))
                    })?;
                    DagScenarioConfig {
                        kinds,
                        ..DagScenarioConfig::gaussian(n, 0.5)
                    }
                }
            };
            if let Some(b) = o.beta {
                cfg.beta = b;
            }
            if let Some(t) = target {
                cfg.target = t;
            }
            if o.rho.is_some() || o.snr.is_some() || o.ber.is_some() {
                return Err(CliError::Usage("--rho, --snr and --ber apply to the grid scenario".into()));
            }
            Scenario::Dag(cfg)
        }
        "grid" => {
            if o.beta.is_some() || o.kinds.is_some() {
                return Err(CliError::Usage("--beta and --kinds apply to the dag scenario".into()));
            }
            let mut cfg = GridScenarioConfig::new(
                n,
                o.rho.unwrap_or(0.5),
                o.cardinality.unwrap_or(4),
                target.unwrap_or(TargetType::Regression),
            );
            if let Some(s) = o.snr {
                cfg.snr = s;
            }
            if let Some(b) = o.ber {
                cfg.ber = b;
            }
            Scenario::Grid(cfg)
        }
        other => return Err(CliError::Usage(format!("unknown scenario `{other}`"))),
    };
    sc.validate()?;
    Ok(sc)
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_json(path: Option<&Path>, value: &impl Serialize) -> CliResult<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Reads a CSV and its schema, naming the offending file on failure.
pub fn load(data: &Path, schema: &Path, target: Option<&str>) -> CliResult<Dataset> {
    let s = read_schema_json(schema).map_err(|e| CliError::Data(format!("{}: {e}", schema.display())))?;
    read_csv(data, &s, target).map_err(|e| CliError::Data(format!("{}: {e}", data.display())))
}
