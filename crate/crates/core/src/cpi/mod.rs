//! Conditional predictive impact.
//!
//! For a fitted model and a held-out set, the feature columns of a group are
//! swapped for their knockoffs and the pointwise loss change is tested with a
//! one-sided paired t-test. One knockoff draw serves every group.

mod inference;

pub use inference::{
    cpi_statistic, holm_adjust, paired_t_test_one_sided, t_quantile, t_upper_tail, TTest,
};

use std::collections::HashSet;
use std::io::Write;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knockoffs::{
    gaussian_knockoffs, sample_sequential_knockoffs, KnockoffMatrix, SequentialConfig,
};
use crate::learners::{instance_loss, FittedModel, LossKind};
use crate::par;
use crate::tabular::{Dataset, Frame};

/// Named set of feature columns tested jointly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub id: String,
    pub columns: Vec<String>,
}

impl FeatureGroup {
    pub fn new(id: impl Into<String>, columns: impl IntoIterator<Item = impl Into<String>>) -> Self {
        FeatureGroup {
            id: id.into(),
            columns: columns.into_iter().map(Into::into).collect(),
        }
    }

    pub fn single(column: impl Into<String>) -> Self {
        let c = column.into();
        FeatureGroup {
            id: c.clone(),
            columns: vec![c],
        }
    }

    /// One group per column of `frame`.
    pub fn per_column(frame: &Frame) -> Vec<FeatureGroup> {
        frame.names().map(FeatureGroup::single).collect()
    }
}

/// Resolves groups to column indices, checking existence and disjointness.
pub fn resolve_groups(frame: &Frame, groups: &[FeatureGroup]) -> Result<Vec<Vec<usize>>> {
    let mut ids = HashSet::new();
    let mut used = HashSet::new();
    groups
        .iter()
        .map(|g| {
            if g.columns.is_empty() {
                return Err(Error::Config(format!("feature group `{}` is empty", g.id)));
            }
            if !ids.insert(g.id.as_str()) {
                return Err(Error::Config(format!("duplicate feature group `{}`", g.id)));
            }
            g.columns
                .iter()
                .map(|c| {
                    let j = frame.require_index(c)?;
                    if !used.insert(j) {
                        return Err(Error::Config(format!(
                            "column `{c}` appears in more than one feature group"
                        )));
                    }
                    Ok(j)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaOrientation {
    /// `L(knockoff) - L(original)`: positive when the feature matters.
    #[default]
    KnockoffMinusOriginal,
    OriginalMinusKnockoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    Sequential(SequentialConfig),
    /// Needs all-continuous features (typically a one-hot encoding).
    Gaussian,
}

impl Sampler {
    pub fn sample<R: RngCore + ?Sized>(&self, features: &Frame, rng: &mut R) -> Result<KnockoffMatrix> {
        match self {
            Sampler::Sequential(cfg) => sample_sequential_knockoffs(features, cfg, rng),
            Sampler::Gaussian => gaussian_knockoffs(features, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpiConfig {
    pub sampler: Sampler,
    /// Task default (MSE or log loss) when unset.
    #[serde(default)]
    pub loss: Option<LossKind>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub orientation: DeltaOrientation,
    /// One group per column when unset.
    #[serde(default)]
    pub groups: Option<Vec<FeatureGroup>>,
}

fn default_alpha() -> f64 {
    0.05
}

impl Default for CpiConfig {
    fn default() -> Self {
        CpiConfig {
            sampler: Sampler::Sequential(SequentialConfig::default()),
            loss: None,
            alpha: default_alpha(),
            orientation: DeltaOrientation::default(),
            groups: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpiResult {
    pub group: String,
    pub cpi: f64,
    pub se: f64,
    pub t: f64,
    #[serde(rename = "p")]
    pub p_one_sided: f64,
    pub ci_lower: f64,
    pub p_adjusted: f64,
    pub n_test: usize,
}

fn losses(model: &FittedModel, frame: &Frame, y: &[f64], loss: LossKind) -> Result<Vec<f64>> {
    instance_loss(y, &model.predict(frame)?, loss)
}

/// Pointwise `L(knockoff-substituted) - L(original)` for one group.
pub fn compute_delta(
    model: &FittedModel,
    loss: LossKind,
    test: &Dataset,
    knockoffs: &KnockoffMatrix,
    group: &FeatureGroup,
) -> Result<Vec<f64>> {
    let y = &test.target()?.values;
    let cols = resolve_groups(&test.features, std::slice::from_ref(group))?.remove(0);
    let base = losses(model, &test.features, y, loss)?;
    substituted_delta(model, loss, test, knockoffs, &cols, &base)
}

fn substituted_delta(
    model: &FittedModel,
    loss: LossKind,
    test: &Dataset,
    knockoffs: &KnockoffMatrix,
    cols: &[usize],
    base: &[f64],
) -> Result<Vec<f64>> {
    let y = &test.target()?.values;
    let swapped = test.features.with_columns_from(&knockoffs.frame, cols)?;
    let after = losses(model, &swapped, y, loss)?;
    Ok(after.iter().zip(base).map(|(a, b)| a - b).collect())
}

/// CPI for every group using a knockoff copy of the test features that the
/// caller already drew.
pub fn cpi_with_knockoffs(
    model: &FittedModel,
    test: &Dataset,
    knockoffs: &KnockoffMatrix,
    cfg: &CpiConfig,
) -> Result<Vec<CpiResult>> {
    test.features.check_compatible(&knockoffs.frame)?;
    let y = &test.target()?.values;
    let loss = cfg.loss.unwrap_or_else(|| LossKind::default_for(model.task()));
    let groups = match &cfg.groups {
        Some(g) => g.clone(),
        None => FeatureGroup::per_column(&test.features),
    };
    let cols = resolve_groups(&test.features, &groups)?;
    let base = losses(model, &test.features, y, loss)?;
    let sign = match cfg.orientation {
        DeltaOrientation::KnockoffMinusOriginal => 1.0,
        DeltaOrientation::OriginalMinusKnockoff => -1.0,
    };
    let tests = par::try_map_range(groups.len(), |g| {
        let mut delta = substituted_delta(model, loss, test, knockoffs, &cols[g], &base)?;
        if sign < 0.0 {
            delta.iter_mut().for_each(|d| *d = -*d);
        }
        paired_t_test_one_sided(&delta, cfg.alpha)
    })?;
    let adjusted = holm_adjust(&tests.iter().map(|t| t.p).collect::<Vec<_>>())?;
    Ok(groups
        .iter()
        .zip(tests)
        .zip(adjusted)
        .map(|((g, t), p_adjusted)| CpiResult {
            group: g.id.clone(),
            cpi: t.mean,
            se: t.se,
            t: t.t,
            p_one_sided: t.p,
            ci_lower: t.ci_lower,
            p_adjusted,
            n_test: y.len(),
        })
        .collect())
}

/// Draws one knockoff copy of the test features and tests every group.
pub fn cpi_analyze<R: RngCore + ?Sized>(
    model: &FittedModel,
    test: &Dataset,
    cfg: &CpiConfig,
    rng: &mut R,
) -> Result<Vec<CpiResult>> {
    let knockoffs = cfg.sampler.sample(&test.features, rng)?;
    cpi_with_knockoffs(model, test, &knockoffs, cfg)
}

pub fn write_results_json<W: Write>(results: &[CpiResult], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, results)?;
    Ok(())
}

pub fn write_results_csv<W: Write>(results: &[CpiResult], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in results {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
