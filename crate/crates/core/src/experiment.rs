//! One analysis replicate: split, fit, run each importance method on the
//! same split, and report per-feature scores.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{loco_with_full, pfi_groups, FiScore};
use crate::cpi::{cpi_with_knockoffs, CpiConfig, CpiResult, DeltaOrientation, FeatureGroup, Sampler};
use crate::error::{Error, Result};
use crate::evalmetrics::ReplicateOutcome;
use crate::knockoffs::{gaussian_knockoffs, sample_sequential_knockoffs, SequentialConfig};
use crate::learners::{evaluate, fit, FittedModel, LearnerSpec, LossKind, Performance};
use crate::seed::{derive_seed, rng_from_seed};
use crate::simgen::{
    gen_dag, gen_grid, oracle_accuracy, oracle_r2, DagScenarioConfig, GeneratedData,
    GridScenarioConfig,
};
use crate::tabular::{split, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CpiSeq,
    CpiGauss,
    Pfi,
    Loco,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::CpiSeq, Method::CpiGauss, Method::Pfi, Method::Loco];

    pub fn name(&self) -> &'static str {
        match self {
            Method::CpiSeq => "cpi-seq",
            Method::CpiGauss => "cpi-gauss",
            Method::Pfi => "pfi",
            Method::Loco => "loco",
        }
    }

    pub fn is_tested(&self) -> bool {
        !matches!(self, Method::Pfi)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "cpi-seq" | "cpiseq" | "cpi" => Ok(Method::CpiSeq),
            "cpi-gauss" | "cpigauss" => Ok(Method::CpiGauss),
            "pfi" => Ok(Method::Pfi),
            "loco" => Ok(Method::Loco),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub learner: LearnerSpec,
    pub train_fraction: f64,
    pub alpha: f64,
    /// Task default when unset.
    pub loss: Option<LossKind>,
    pub sequential: SequentialConfig,
    pub n_permutations: usize,
    pub orientation: DeltaOrientation,
    /// One group per feature column when unset.
    #[serde(default)]
    pub groups: Option<Vec<FeatureGroup>>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            learner: LearnerSpec::random_forest(500),
            train_fraction: 2.0 / 3.0,
            alpha: 0.05,
            loss: None,
            sequential: SequentialConfig::default(),
            n_permutations: 5,
            orientation: DeltaOrientation::default(),
            groups: None,
        }
    }
}

/// Per-feature output of one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutput {
    pub method: Method,
    pub features: Vec<String>,
    pub scores: Vec<f64>,
    pub p_values: Option<Vec<f64>>,
    pub p_adjusted: Option<Vec<f64>>,
    /// Full CPI rows for the CPI methods.
    pub cpi: Option<Vec<CpiResult>>,
    /// Full score rows for PFI and LOCO.
    pub fi: Option<Vec<FiScore>>,
    /// Held-out performance of the model the method analyzed.
    pub performance: Performance,
}

fn from_cpi(method: Method, results: Vec<CpiResult>, performance: Performance) -> MethodOutput {
    MethodOutput {
        method,
        features: results.iter().map(|r| r.group.clone()).collect(),
        scores: results.iter().map(|r| r.cpi).collect(),
        p_values: Some(results.iter().map(|r| r.p_one_sided).collect()),
        p_adjusted: Some(results.iter().map(|r| r.p_adjusted).collect()),
        cpi: Some(results),
        fi: None,
        performance,
    }
}

// Sub-seed tags, fixed so adding methods never shifts another's stream.
const TAG_SPLIT: u64 = 0;
const TAG_FIT: u64 = 1;
const TAG_SEQ: u64 = 2;
const TAG_GAUSS_FIT: u64 = 3;
const TAG_GAUSS: u64 = 4;
const TAG_PFI: u64 = 5;
const TAG_LOCO: u64 = 6;

/// Runs `methods` on one train/test split of `data` drawn from `seed`.
pub fn run_methods(
    data: &Dataset,
    methods: &[Method],
    cfg: &AnalysisConfig,
    seed: u64,
) -> Result<Vec<MethodOutput>> {
    let (train, test) = split(data, cfg.train_fraction, &mut rng_from_seed(derive_seed(seed, TAG_SPLIT)))?;
    run_methods_on_split(&train, &test, methods, cfg, seed)
}

/// Like [`run_methods`] with a caller-provided split.
pub fn run_methods_on_split(
    train: &Dataset,
    test: &Dataset,
    methods: &[Method],
    cfg: &AnalysisConfig,
    seed: u64,
) -> Result<Vec<MethodOutput>> {
    let groups = match &cfg.groups {
        Some(g) => g.clone(),
        None => FeatureGroup::per_column(&train.features),
    };
    let needs_model =
        methods.iter().any(|m| *m != Method::CpiGauss) || train.features.is_all_continuous();
    let model: Option<FittedModel> = if needs_model {
        Some(fit(&cfg.learner, train, &mut rng_from_seed(derive_seed(seed, TAG_FIT)))?)
    } else {
        None
    };
    let performance = match &model {
        Some(m) => Some(evaluate(m, test)?),
        None => None,
    };
    let cpi_cfg = |groups: Option<Vec<FeatureGroup>>| CpiConfig {
        sampler: Sampler::Sequential(cfg.sequential.clone()),
        loss: cfg.loss,
        alpha: cfg.alpha,
        orientation: cfg.orientation,
        groups,
    };

    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let output = match method {
            Method::CpiSeq => {
                let model = model.as_ref().expect("model fitted");
                let ko = sample_sequential_knockoffs(
                    &test.features,
                    &cfg.sequential,
                    &mut rng_from_seed(derive_seed(seed, TAG_SEQ)),
                )?;
                let res = cpi_with_knockoffs(model, test, &ko, &cpi_cfg(Some(groups.clone())))?;
                from_cpi(method, res, performance.unwrap())
            }
            Method::CpiGauss => {
                let mut gauss_rng = rng_from_seed(derive_seed(seed, TAG_GAUSS));
                if train.features.is_all_continuous() {
                    let model = model.as_ref().expect("model fitted");
                    let ko = gaussian_knockoffs(&test.features, &mut gauss_rng)?;
                    let res = cpi_with_knockoffs(model, test, &ko, &cpi_cfg(Some(groups.clone())))?;
                    from_cpi(method, res, performance.unwrap())
                } else {
                    // model and knockoffs on the treatment coding, one group per
                    // original column
                    let (enc_train, _) = train.dummy()?;
                    let (enc_test, enc) = test.dummy()?;
                    let enc_model = fit(
                        &cfg.learner,
                        &enc_train,
                        &mut rng_from_seed(derive_seed(seed, TAG_GAUSS_FIT)),
                    )?;
                    let perf = evaluate(&enc_model, &enc_test)?;
                    let enc_groups = groups
                        .iter()
                        .map(|g| {
                            let cols = g
                                .columns
                                .iter()
                                .map(|c| {
                                    let eg = enc.group(c).ok_or_else(|| Error::MissingColumn(c.clone()))?;
                                    Ok(enc.names[eg.range.clone()].to_vec())
                                })
                                .collect::<Result<Vec<_>>>()?;
                            Ok(FeatureGroup::new(g.id.clone(), cols.concat()))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let ko = gaussian_knockoffs(&enc_test.features, &mut gauss_rng)?;
                    let res = cpi_with_knockoffs(&enc_model, &enc_test, &ko, &cpi_cfg(Some(enc_groups)))?;
                    from_cpi(method, res, perf)
                }
            }
            Method::Pfi => {
                let model = model.as_ref().expect("model fitted");
                let loss = cfg.loss.unwrap_or_else(|| LossKind::default_for(model.task()));
                let scores = pfi_groups(
                    model,
                    test,
                    loss,
                    &groups,
                    cfg.n_permutations,
                    &mut rng_from_seed(derive_seed(seed, TAG_PFI)),
                )?;
                MethodOutput {
                    method,
                    features: scores.iter().map(|s| s.group.clone()).collect(),
                    scores: scores.iter().map(|s| s.score).collect(),
                    p_values: None,
                    p_adjusted: None,
                    cpi: None,
                    fi: Some(scores),
                    performance: performance.unwrap(),
                }
            }
            Method::Loco => {
                let model = model.as_ref().expect("model fitted");
                let loss = cfg.loss.unwrap_or_else(|| LossKind::default_for(model.task()));
                let scores = loco_with_full(
                    model,
                    &cfg.learner,
                    train,
                    test,
                    loss,
                    &groups,
                    cfg.alpha,
                    &mut rng_from_seed(derive_seed(seed, TAG_LOCO)),
                )?;
                MethodOutput {
                    method,
                    features: scores.iter().map(|s| s.group.clone()).collect(),
                    scores: scores.iter().map(|s| s.score).collect(),
                    p_values: Some(scores.iter().map(|s| s.p.unwrap()).collect()),
                    p_adjusted: Some(scores.iter().map(|s| s.p_adjusted.unwrap()).collect()),
                    cpi: None,
                    fi: Some(scores),
                    performance: performance.unwrap(),
                }
            }
        };
        out.push(output);
    }
    Ok(out)
}

/// Simulation scenario for benchmark replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Dag(DagScenarioConfig),
    Grid(GridScenarioConfig),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Dag(_) => "dag",
            Scenario::Grid(_) => "grid",
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Scenario::Dag(c) => c.n,
            Scenario::Grid(c) => c.n,
        }
    }

    pub fn with_n(&self, n: usize) -> Scenario {
        let mut s = self.clone();
        match &mut s {
            Scenario::Dag(c) => c.n = n,
            Scenario::Grid(c) => c.n = n,
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::Dag(c) => c.validate(),
            Scenario::Grid(c) => c.validate(),
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GeneratedData> {
        match self {
            Scenario::Dag(c) => gen_dag(c, rng),
            Scenario::Grid(c) => gen_grid(c, rng),
        }
    }
}

/// Oracle performance of generated data: `R*^2` from the realized signal
/// variance, or the Bayes accuracy.
pub fn data_oracle(data: &GeneratedData) -> Result<f64> {
    match (&data.bayes_probabilities, data.noise_sd) {
        (Some(p), _) => oracle_accuracy(p),
        (None, Some(sd)) => {
            let n = data.signal.len() as f64;
            let m = data.signal.iter().sum::<f64>() / n;
            let var = data.signal.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (n - 1.0);
            oracle_r2(var / (sd * sd))
        }
        (None, None) => Err(Error::Config("generated data carries no oracle".into())),
    }
}

const TAG_DATA: u64 = 100;

/// Seed of replicate `replicate` under base seed `seed`.
pub fn replicate_seed(seed: u64, replicate: u64) -> u64 {
    seed.wrapping_add(replicate)
}

/// Dataset of replicate `replicate` under base seed `seed`.
pub fn generate_replicate(scenario: &Scenario, seed: u64, replicate: u64) -> Result<GeneratedData> {
    let rep_seed = replicate_seed(seed, replicate);
    scenario.generate(&mut rng_from_seed(derive_seed(rep_seed, TAG_DATA)))
}

/// Generates one dataset and scores every method on it.
pub fn run_replicate(
    scenario: &Scenario,
    methods: &[Method],
    cfg: &AnalysisConfig,
    seed: u64,
    replicate: u64,
) -> Result<Vec<ReplicateOutcome>> {
    let rep_seed = replicate_seed(seed, replicate);
    let data = generate_replicate(scenario, seed, replicate)?;
    let oracle = data_oracle(&data).ok();
    let outputs = run_methods(&data.dataset, methods, cfg, rep_seed)?;
    Ok(outputs
        .into_iter()
        .map(|o| ReplicateOutcome {
            scenario: scenario.name().to_string(),
            n: scenario.n(),
            method: o.method.name().to_string(),
            replicate,
            features: o.features,
            scores: o.scores,
            p_values: o.p_values,
            relevant: data.relevant.clone(),
            validation: Some(o.performance.value()),
            oracle,
        })
        .collect())
}
