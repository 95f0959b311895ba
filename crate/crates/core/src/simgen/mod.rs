//! Simulation scenarios with known ground truth.
//!
//! * The four-variable DAG `X1 -> X4 -> Y <- X3 <- X2`, where `X1` and `X2`
//!   are conditionally independent of `Y` given the rest.
//! * A twelve-variable Gaussian grid with linear, nonlinear and categorical
//!   effects, each relevant variable paired with a correlated irrelevant one.
//!
//! Categorical variables are produced by cutting a latent continuous value
//! at its empirical quantiles. Their effect on downstream variables goes
//! through equidistant level effects in `[-1, 1]`, assigned to levels in the
//! (alphabetical) level order of randomly drawn letter labels.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::tabular::{Column, ColumnSchema, Dataset, Frame, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Categorical(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetType {
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagScenarioConfig {
    pub n: usize,
    pub beta: f64,
    /// Kinds of X1..X4.
    pub kinds: [VarKind; 4],
    pub target: TargetType,
}

impl DagScenarioConfig {
    pub fn gaussian(n: usize, beta: f64) -> Self {
        DagScenarioConfig {
            n,
            beta,
            kinds: [VarKind::Continuous; 4],
            target: TargetType::Regression,
        }
    }

    /// X1 and X3 categorical with `c` levels.
    pub fn mixed(n: usize, beta: f64, c: usize) -> Self {
        DagScenarioConfig {
            kinds: [
                VarKind::Categorical(c),
                VarKind::Continuous,
                VarKind::Categorical(c),
                VarKind::Continuous,
            ],
            ..Self::gaussian(n, beta)
        }
    }

    /// Classification with a 10-level X3 and `beta = 0.9`.
    pub fn classification(n: usize) -> Self {
        DagScenarioConfig {
            kinds: [
                VarKind::Continuous,
                VarKind::Continuous,
                VarKind::Categorical(10),
                VarKind::Continuous,
            ],
            target: TargetType::Classification,
            ..Self::gaussian(n, 0.9)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() {
            return Err(Error::Config("beta must be finite".into()));
        }
        for k in &self.kinds {
            if let VarKind::Categorical(c) = *k {
                check_cardinality(c, self.n)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScenarioConfig {
    pub n: usize,
    pub rho: f64,
    pub cardinality: usize,
    pub target: TargetType,
    #[serde(default = "default_snr")]
    pub snr: f64,
    #[serde(default = "default_ber")]
    pub ber: f64,
}

fn default_snr() -> f64 {
    2.0
}

fn default_ber() -> f64 {
    0.2
}

impl GridScenarioConfig {
    pub fn new(n: usize, rho: f64, cardinality: usize, target: TargetType) -> Self {
        GridScenarioConfig {
            n,
            rho,
            cardinality,
            target,
            snr: default_snr(),
            ber: default_ber(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (-1, 1), got {}", self.rho)));
        }
        check_cardinality(self.cardinality, self.n)
    }
}

fn check_cardinality(c: usize, n: usize) -> Result<()> {
    if !(2..=26).contains(&c) {
        return Err(Error::Config(format!(
            "categorical variables need 2 to 26 levels, got {c}"
        )));
    }
    if n < 10 * c {
        return Err(Error::Config(format!(
            "{n} rows are too few for {c} quantile levels (need at least {})",
            10 * c
        )));
    }
    Ok(())
}

/// Simulated dataset with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub dataset: Dataset,
    /// Whether each feature enters the response.
    pub relevant: Vec<bool>,
    /// Whether each feature is independent of the response given the others.
    pub conditional_null: Vec<bool>,
    /// `P(Y = 1 | X)` for classification scenarios.
    pub bayes_probabilities: Option<Vec<f64>>,
    /// Noiseless regression signal or classification linear predictor.
    pub signal: Vec<f64>,
    pub noise_sd: Option<f64>,
    pub beta_ber: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundTruth {
    pub features: Vec<String>,
    pub relevant: Vec<bool>,
    pub conditional_null: Vec<bool>,
    pub noise_sd: Option<f64>,
    pub beta_ber: Option<f64>,
}

impl GeneratedData {
    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            features: self.dataset.features.names().map(String::from).collect(),
            relevant: self.relevant.clone(),
            conditional_null: self.conditional_null.clone(),
            noise_sd: self.noise_sd,
            beta_ber: self.beta_ber,
        }
    }
}

/// Equidistant effects from `-beta` to `beta`.
pub fn level_effects(beta: f64, c: usize) -> Vec<f64> {
    if c < 2 {
        return vec![0.0; c];
    }
    (0..c)
        .map(|k| beta * (2.0 * k as f64 / (c - 1) as f64 - 1.0))
        .collect()
}

/// Categorical version of a continuous variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorized {
    pub schema_levels: Vec<String>,
    /// Index into `schema_levels` per row.
    pub codes: Vec<u32>,
    /// Quantile bin per row, `0` holding the smallest values.
    pub bins: Vec<usize>,
    /// Unit-scale level effect per row.
    pub effects: Vec<f64>,
}

/// Type-7 sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Cuts `values` into `c` empirical quantile bins and names the bins with
/// distinct random capital letters.
pub fn categorize<R: Rng + ?Sized>(values: &[f64], c: usize, rng: &mut R) -> Result<Categorized> {
    if !(2..=26).contains(&c) {
        return Err(Error::Config(format!(
            "categorization needs 2 to 26 levels, got {c}"
        )));
    }
    if values.len() < c {
        return Err(Error::TooFewRows(format!(
            "{} values cannot fill {c} levels",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let breaks: Vec<f64> = (1..c).map(|k| quantile_sorted(&sorted, k as f64 / c as f64)).collect();
    let mut all = vec![sorted[0]];
    all.extend(&breaks);
    all.push(sorted[sorted.len() - 1]);
    if all.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "quantile boundaries for {c} levels are not distinct"
        )));
    }
    let bins: Vec<usize> = values
        .iter()
        .map(|v| breaks.partition_point(|b| b < v))
        .collect();

    let letters: Vec<char> = sample_indices(rng, 26, c)
        .into_iter()
        .map(|k| (b'A' + k as u8) as char)
        .collect();
    let mut schema_levels: Vec<String> = letters.iter().map(|l| l.to_string()).collect();
    schema_levels.sort();
    let code_of_bin: Vec<u32> = letters
        .iter()
        .map(|l| schema_levels.iter().position(|s| s.starts_with(*l)).unwrap() as u32)
        .collect();
    let unit = level_effects(1.0, c);
    let codes: Vec<u32> = bins.iter().map(|&b| code_of_bin[b]).collect();
    let effects = codes.iter().map(|&k| unit[k as usize]).collect();
    Ok(Categorized {
        schema_levels,
        codes,
        bins,
        effects,
    })
}

fn normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

/// Latent value turned into a learner-visible column plus its numeric
/// representation for downstream equations.
fn materialize<R: Rng + ?Sized>(
    name: &str,
    latent: Vec<f64>,
    kind: VarKind,
    rng: &mut R,
) -> Result<(ColumnSchema, Column, Vec<f64>)> {
    match kind {
        VarKind::Continuous => Ok((
            ColumnSchema::continuous(name),
            Column::Continuous(latent.clone()),
            latent,
        )),
        VarKind::Categorical(c) => {
            let cat = categorize(&latent, c, rng).map_err(|e| e.in_column(name))?;
            Ok((
                ColumnSchema::categorical(name, cat.schema_levels)?,
                Column::Categorical(cat.codes),
                cat.effects,
            ))
        }
    }
}

fn binary_target<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<Target> {
    let values = probs
        .iter()
        .map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
        .collect();
    let mut t = Target::binary("Y", values)?;
    t.labels = Some(["0".into(), "1".into()]);
    Ok(t)
}

pub fn gen_dag<R: Rng + ?Sized>(cfg: &DagScenarioConfig, rng: &mut R) -> Result<GeneratedData> {
    cfg.validate()?;
    let n = cfg.n;
    let b = cfg.beta;
    let (s1, c1, r1) = materialize("X1", normals(n, rng), cfg.kinds[0], rng)?;
    let (s2, c2, r2) = materialize("X2", normals(n, rng), cfg.kinds[1], rng)?;
    let e3 = normals(n, rng);
    let x3: Vec<f64> = (0..n).map(|i| b * r2[i] + e3[i]).collect();
    let (s3, c3, r3) = materialize("X3", x3, cfg.kinds[2], rng)?;
    let e4 = normals(n, rng);
    let x4: Vec<f64> = (0..n).map(|i| b * r1[i] + e4[i]).collect();
    let (s4, c4, r4) = materialize("X4", x4, cfg.kinds[3], rng)?;
    let features = Frame::new(vec![s1, s2, s3, s4], vec![c1, c2, c3, c4])?;

    let (target, signal, probs, noise_sd) = match cfg.target {
        TargetType::Regression => {
            let signal: Vec<f64> = (0..n).map(|i| b * r3[i] + b * r4[i]).collect();
            let eps = normals(n, rng);
            let y = signal.iter().zip(&eps).map(|(s, e)| s + e).collect();
            (Target::continuous("Y", y), signal, None, Some(1.0))
        }
        TargetType::Classification => {
            let eta: Vec<f64> = (0..n).map(|i| b * r3[i] - b * r4[i]).collect();
            let probs: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
            (binary_target(&probs, rng)?, eta, Some(probs), None)
        }
    };
    let active = b != 0.0;
    Ok(GeneratedData {
        dataset: Dataset::new(features, Some(target))?,
        relevant: vec![false, false, active, active],
        conditional_null: vec![true, true, !active, !active],
        bayes_probabilities: probs,
        signal,
        noise_sd,
        beta_ber: None,
    })
}

/// Effect sizes of X1..X12 in the grid scenario.
pub const GRID_BETA: [f64; 12] = [0.0, 1.0, 0.0, 3.0, 0.0, 1.0, 0.0, 3.0, 0.0, 1.0, 0.0, 3.0];

/// `+1` inside the interquartile range of the standard normal, `-1` outside.
pub fn interquartile_indicator(x: f64) -> f64 {
    let q = Normal::standard().inverse_cdf(0.75);
    if (-q..=q).contains(&x) {
        1.0
    } else {
        -1.0
    }
}

/// Noise standard deviation reaching `var(signal) / sigma^2 = target_snr`.
pub fn calibrate_snr(signal: &[f64], target_snr: f64) -> Result<f64> {
    if !(target_snr.is_finite() && target_snr > 0.0) {
        return Err(Error::Config(format!(
            "target SNR must be positive and finite, got {target_snr}"
        )));
    }
    if signal.len() < 2 {
        return Err(Error::TooFewRows("SNR calibration needs 2 signal values".into()));
    }
    let var = sample_variance(signal);
    if var <= 0.0 || !var.is_finite() {
        return Err(Error::Numeric("signal has zero variance".into()));
    }
    Ok((var / target_snr).sqrt())
}

/// Mean Bayes error `mean(min(p, 1 - p))` with `p = logistic(b * eta)`.
pub fn bayes_error(eta: &[f64], b: f64) -> f64 {
    eta.iter()
        .map(|&e| {
            let p = sigmoid(b * e);
            p.min(1.0 - p)
        })
        .sum::<f64>()
        / eta.len() as f64
}

/// Scale `b` with `bayes_error(eta, b) = target_ber`, found by bisection.
pub fn calibrate_ber(eta: &[f64], target_ber: f64) -> Result<f64> {
    if eta.is_empty() || eta.iter().all(|&e| e == eta[0]) {
        return Err(Error::Numeric("linear predictor is constant".into()));
    }
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return Err(Error::Config(format!(
            "target Bayes error must lie in (0, 0.5), got {target_ber}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while bayes_error(eta, hi) > target_ber {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numeric(format!(
                "Bayes error {target_ber} is below what this predictor can reach"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bayes_error(eta, mid) > target_ber {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    let b = 0.5 * (lo + hi);
    if (bayes_error(eta, b) - target_ber).abs() > 1e-3 {
        return Err(Error::Numeric(format!(
            "Bayes error {target_ber} is not reachable within tolerance"
        )));
    }
    Ok(b)
}

pub fn gen_grid<R: Rng + ?Sized>(cfg: &GridScenarioConfig, rng: &mut R) -> Result<GeneratedData> {
    cfg.validate()?;
    let n = cfg.n;
    let tail = (1.0 - cfg.rho * cfg.rho).sqrt();
    let mut latent: Vec<Vec<f64>> = Vec::with_capacity(12);
    for _ in 0..6 {
        let z1 = normals(n, rng);
        let z2 = normals(n, rng);
        let paired = z1.iter().zip(&z2).map(|(a, b)| cfg.rho * a + tail * b).collect();
        latent.push(z1);
        latent.push(paired);
    }
    let mut schema = Vec::with_capacity(12);
    let mut columns = Vec::with_capacity(12);
    let mut signal = vec![0.0; n];
    for (j, x) in latent.into_iter().enumerate() {
        let name = format!("X{}", j + 1);
        let beta = GRID_BETA[j];
        let tau: Vec<f64> = match j {
            0..=3 => x.clone(),
            4..=7 => x.iter().map(|&v| interquartile_indicator(v)).collect(),
            _ => {
                let (s, c, effects) =
                    materialize(&name, x, VarKind::Categorical(cfg.cardinality), rng)?;
                schema.push(s);
                columns.push(c);
                for (acc, t) in signal.iter_mut().zip(&effects) {
                    *acc += beta * t;
                }
                continue;
            }
        };
        for (acc, t) in signal.iter_mut().zip(&tau) {
            *acc += beta * t;
        }
        schema.push(ColumnSchema::continuous(name));
        columns.push(Column::Continuous(x));
    }
    let features = Frame::new(schema, columns)?;
    let relevant: Vec<bool> = GRID_BETA.iter().map(|&b| b != 0.0).collect();
    let conditional_null = relevant.iter().map(|r| !r).collect();
    let (target, probs, noise_sd, beta_ber) = match cfg.target {
        TargetType::Regression => {
            let sd = calibrate_snr(&signal, cfg.snr)?;
            let y = signal
                .iter()
                .map(|s| s + sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            (Target::continuous("Y", y), None, Some(sd), None)
        }
        TargetType::Classification => {
            let b = calibrate_ber(&signal, cfg.ber)?;
            let probs: Vec<f64> = signal.iter().map(|&s| sigmoid(b * s)).collect();
            (binary_target(&probs, rng)?, Some(probs), None, Some(b))
        }
    };
    Ok(GeneratedData {
        dataset: Dataset::new(features, Some(target))?,
        relevant,
        conditional_null,
        bayes_probabilities: probs,
        signal,
        noise_sd,
        beta_ber,
    })
}

/// Best achievable held-out performance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    R2Star(f64),
    AccuracyStar(f64),
}

pub fn oracle_r2(snr: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(Error::Config(format!("SNR must be non-negative, got {snr}")));
    }
    if snr.is_infinite() {
        return Ok(1.0);
    }
    Ok(snr / (snr + 1.0))
}

pub fn oracle_accuracy(probabilities: &[f64]) -> Result<f64> {
    if probabilities.is_empty() {
        return Err(Error::TooFewRows("no probabilities".into()));
    }
    if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Config(format!("probability {p} outside [0, 1]")));
    }
    Ok(probabilities.iter().map(|&p| p.max(1.0 - p)).sum::<f64>() / probabilities.len() as f64)
}

/// Oracle for a generated dataset: `R*^2` from `snr` for regression,
/// accuracy from the Bayes probabilities for classification.
pub fn oracle_performance(data: &GeneratedData, snr: f64) -> Result<Oracle> {
    match &data.bayes_probabilities {
        Some(p) => Ok(Oracle::AccuracyStar(oracle_accuracy(p)?)),
        None => Ok(Oracle::R2Star(oracle_r2(snr)?)),
    }
}
