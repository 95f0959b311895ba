//! Supervised learners, pointwise losses and held-out performance.
//!
//! A fitted model remembers the schema it was trained on and refuses frames
//! with any other schema, so knockoff-substituted test frames must keep the
//! original column names, kinds and level sets.

mod forest;
mod linear;
mod logistic;

pub use forest::{Forest, ForestParams};
pub use linear::{design_with_intercept, LinearModel};
pub use logistic::LogisticModel;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{Dataset, Frame, Target, TargetKind};

/// Probabilities are clipped to `[EPS, 1 - EPS]` before taking logs.
pub const LOGLOSS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn of(target: &Target) -> Task {
        match target.kind {
            TargetKind::Continuous => Task::Regression,
            TargetKind::Binary => Task::Classification,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    /// OLS for continuous targets.
    Linear,
    /// Logistic regression for binary targets.
    Logistic,
    /// Linear or logistic depending on the target.
    Glm,
    RandomForest,
}

/// Learner choice, written as `linear`, `logistic`, `glm`, `rf` or
/// `rf(trees=500, mtry=3, min_node=5, bootstrap=true)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub forest: ForestParams,
}

impl LearnerSpec {
    pub fn linear() -> Self {
        LearnerSpec {
            kind: LearnerKind::Linear,
            forest: ForestParams::default(),
        }
    }

    pub fn logistic() -> Self {
        LearnerSpec {
            kind: LearnerKind::Logistic,
            ..Self::linear()
        }
    }

    pub fn glm() -> Self {
        LearnerSpec {
            kind: LearnerKind::Glm,
            ..Self::linear()
        }
    }

    pub fn random_forest(n_trees: usize) -> Self {
        LearnerSpec {
            kind: LearnerKind::RandomForest,
            forest: ForestParams {
                n_trees,
                ..ForestParams::default()
            },
        }
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LearnerKind::Linear => f.write_str("linear"),
            LearnerKind::Logistic => f.write_str("logistic"),
            LearnerKind::Glm => f.write_str("glm"),
            LearnerKind::RandomForest => {
                let p = &self.forest;
                write!(f, "rf(trees={}", p.n_trees)?;
                if let Some(m) = p.mtry {
                    write!(f, ",mtry={m}")?;
                }
                if let Some(m) = p.min_node_size {
                    write!(f, ",min_node={m}")?;
                }
                if !p.bootstrap {
                    f.write_str(",bootstrap=false")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for LearnerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, args) = match s.find('(') {
            Some(open) => {
                let rest = s[open + 1..].trim_end();
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Config(format!("unbalanced parentheses in `{s}`")))?;
                (s[..open].trim(), Some(inner))
            }
            None => (s, None),
        };
        let mut spec = match head.to_ascii_lowercase().as_str() {
            "linear" | "lm" | "ols" => LearnerSpec::linear(),
            "logistic" | "logit" => LearnerSpec::logistic(),
            "glm" => LearnerSpec::glm(),
            "rf" | "random_forest" | "ranger" => LearnerSpec::random_forest(500),
            other => return Err(Error::Config(format!("unknown learner `{other}`"))),
        };
        let Some(args) = args else { return Ok(spec) };
        if spec.kind != LearnerKind::RandomForest && !args.trim().is_empty() {
            return Err(Error::Config(format!("learner `{head}` takes no parameters")));
        }
        for arg in args.split(',').map(str::trim).filter(|a| !a.is_empty()) {
            let (key, value) = arg
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{arg}`")))?;
            let value = value.trim();
            let int = || {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("`{key}` needs an integer, got `{value}`")))
            };
            match key.trim() {
                "trees" | "num_trees" | "n_trees" => spec.forest.n_trees = int()?,
                "mtry" => spec.forest.mtry = Some(int()?),
                "min_node" | "min_node_size" => spec.forest.min_node_size = Some(int()?),
                "bootstrap" | "replace" => {
                    spec.forest.bootstrap = value
                        .parse()
                        .map_err(|_| Error::Config(format!("`{key}` needs true or false")))?
                }
                other => return Err(Error::Config(format!("unknown forest parameter `{other}`"))),
            }
        }
        if spec.forest.n_trees == 0 {
            return Err(Error::Config("random forest needs at least one tree".into()));
        }
        if spec.forest.mtry == Some(0) {
            return Err(Error::Config("mtry must be positive".into()));
        }
        Ok(spec)
    }
}

impl TryFrom<String> for LearnerSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LearnerSpec> for String {
    fn from(s: LearnerSpec) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum State {
    Linear(LinearModel),
    Logistic(LogisticModel),
    Forest(Forest),
    Constant(f64),
}

/// A trained model. Classification models predict `P(Y = 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    spec: Option<LearnerSpec>,
    task: Task,
    fingerprint: u64,
    n_features: usize,
    state: State,
}

impl FittedModel {
    /// Model that ignores its input and always predicts `value`.
    pub fn constant(schema_of: &Frame, task: Task, value: f64) -> FittedModel {
        FittedModel {
            spec: None,
            task,
            fingerprint: schema_of.fingerprint(),
            n_features: schema_of.n_cols(),
            state: State::Constant(value),
        }
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn spec(&self) -> Option<&LearnerSpec> {
        self.spec.as_ref()
    }

    pub fn schema_fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Raw forest, when the model is one.
    pub fn forest(&self) -> Option<&Forest> {
        match &self.state {
            State::Forest(f) => Some(f),
            _ => None,
        }
    }

    pub fn predict(&self, frame: &Frame) -> Result<Vec<f64>> {
        if frame.fingerprint() != self.fingerprint || frame.n_cols() != self.n_features {
            return Err(Error::Schema(
                "prediction frame does not match the training schema".into(),
            ));
        }
        let out = match &self.state {
            State::Linear(m) => m.predict(frame),
            State::Logistic(m) => m.predict(frame),
            State::Forest(f) => f.predict(frame),
            State::Constant(v) => vec![*v; frame.n_rows()],
        };
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("prediction for row {i}")));
        }
        Ok(out)
    }
}

/// Trains `spec` on `data`. Forest randomness is drawn from `rng`.
pub fn fit<R: RngCore + ?Sized>(spec: &LearnerSpec, data: &Dataset, rng: &mut R) -> Result<FittedModel> {
    let target = data.target()?;
    let task = Task::of(target);
    let frame = &data.features;
    let y = &target.values;
    if y.is_empty() {
        return Err(Error::TooFewRows("cannot fit a model on zero rows".into()));
    }
    if task == Task::Classification {
        let ones = y.iter().filter(|&&v| v == 1.0).count();
        if ones == 0 || ones == y.len() {
            return Err(Error::Config(
                "classification target has a single class in the training data".into(),
            ));
        }
    }
    let kind = match (spec.kind, task) {
        (LearnerKind::Glm, Task::Regression) => LearnerKind::Linear,
        (LearnerKind::Glm, Task::Classification) => LearnerKind::Logistic,
        (k, _) => k,
    };
    let state = match (kind, task) {
        (LearnerKind::Linear, Task::Regression) => State::Linear(LinearModel::fit(frame, y)?),
        (LearnerKind::Logistic, Task::Classification) => {
            State::Logistic(LogisticModel::fit(frame, y)?)
        }
        (LearnerKind::RandomForest, _) => {
            if y.iter().all(|&v| v == y[0]) {
                State::Constant(y[0])
            } else {
                let seed = rng.next_u64();
                State::Forest(Forest::fit(
                    frame,
                    y,
                    &spec.forest,
                    task == Task::Classification,
                    seed,
                )?)
            }
        }
        (LearnerKind::Linear, Task::Classification) => {
            return Err(Error::Config(
                "linear learner needs a continuous target; use logistic".into(),
            ))
        }
        (LearnerKind::Logistic, Task::Regression) => {
            return Err(Error::Config(
                "logistic learner needs a binary target; use linear".into(),
            ))
        }
        (LearnerKind::Glm, _) => unreachable!(),
    };
    Ok(FittedModel {
        spec: Some(*spec),
        task,
        fingerprint: frame.fingerprint(),
        n_features: frame.n_cols(),
        state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Squared error.
    Mse,
    /// Binary cross-entropy on predicted probabilities.
    LogLoss,
}

impl LossKind {
    pub fn default_for(task: Task) -> LossKind {
        match task {
            Task::Regression => LossKind::Mse,
            Task::Classification => LossKind::LogLoss,
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mse" | "squared" | "l2" => Ok(LossKind::Mse),
            "logloss" | "log_loss" | "cross_entropy" | "bce" => Ok(LossKind::LogLoss),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

/// Pointwise loss between responses and predictions.
pub fn instance_loss(y: &[f64], pred: &[f64], loss: LossKind) -> Result<Vec<f64>> {
    if y.len() != pred.len() {
        return Err(Error::Dimension(format!(
            "{} responses, {} predictions",
            y.len(),
            pred.len()
        )));
    }
    match loss {
        LossKind::Mse => Ok(y.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).collect()),
        LossKind::LogLoss => {
            if let Some(i) = pred.iter().position(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Config(format!(
                    "log loss needs probabilities, prediction {i} is {}",
                    pred[i]
                )));
            }
            Ok(y.iter()
                .zip(pred)
                .map(|(&t, &p)| {
                    let p = p.clamp(LOGLOSS_EPS, 1.0 - LOGLOSS_EPS);
                    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
                })
                .collect())
        }
    }
}

/// Held-out performance: R^2 for regression, accuracy at 0.5 for
/// classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", content = "value", rename_all = "snake_case")]
pub enum Performance {
    R2(f64),
    Accuracy(f64),
}

impl Performance {
    pub fn value(&self) -> f64 {
        match *self {
            Performance::R2(v) | Performance::Accuracy(v) => v,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Performance::R2(_) => "r2",
            Performance::Accuracy(_) => "accuracy",
        }
    }
}

pub fn performance(task: Task, y: &[f64], pred: &[f64]) -> Result<Performance> {
    if y.len() != pred.len() || y.is_empty() {
        return Err(Error::Dimension(format!(
            "{} responses, {} predictions",
            y.len(),
            pred.len()
        )));
    }
    match task {
        Task::Regression => {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
            if sst == 0.0 {
                return Err(Error::Numeric("R^2 is undefined for a constant response".into()));
            }
            let sse: f64 = y.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).sum();
            Ok(Performance::R2(1.0 - sse / sst))
        }
        Task::Classification => {
            let hits = y
                .iter()
                .zip(pred)
                .filter(|(&t, &p)| (p > 0.5) == (t == 1.0))
                .count();
            Ok(Performance::Accuracy(hits as f64 / y.len() as f64))
        }
    }
}

/// Predicts `data` and scores the predictions.
pub fn evaluate(model: &FittedModel, data: &Dataset) -> Result<Performance> {
    let target = data.target()?;
    let pred = model.predict(&data.features)?;
    performance(model.task(), &target.values, &pred)
}
