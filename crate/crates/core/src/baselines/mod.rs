//! Permutation feature importance and leave-one-covariate-out.

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::cpi::{holm_adjust, paired_t_test_one_sided, resolve_groups, FeatureGroup};
use crate::error::{Error, Result};
use crate::learners::{fit, instance_loss, FittedModel, LearnerSpec, LossKind};
use crate::par;
use crate::seed::{derive_seed, rng_from_seed};
use crate::tabular::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiMethod {
    Pfi,
    Loco,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiScore {
    pub group: String,
    pub method: FiMethod,
    pub score: f64,
    /// Test statistics, LOCO only.
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub p_adjusted: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// PFI for one group: mean loss increase when the group's columns are
/// permuted jointly over test rows, averaged over `n_permutations` draws.
pub fn pfi<R: RngCore + ?Sized>(
    model: &FittedModel,
    test: &Dataset,
    loss: LossKind,
    group: &FeatureGroup,
    n_permutations: usize,
    rng: &mut R,
) -> Result<FiScore> {
    Ok(pfi_groups(model, test, loss, std::slice::from_ref(group), n_permutations, rng)?.remove(0))
}

pub fn pfi_groups<R: RngCore + ?Sized>(
    model: &FittedModel,
    test: &Dataset,
    loss: LossKind,
    groups: &[FeatureGroup],
    n_permutations: usize,
    rng: &mut R,
) -> Result<Vec<FiScore>> {
    if n_permutations == 0 {
        return Err(Error::Config("PFI needs at least one permutation".into()));
    }
    let cols = resolve_groups(&test.features, groups)?;
    let y = &test.target()?.values;
    let base = mean(&instance_loss(y, &model.predict(&test.features)?, loss)?);
    let base_seed = rng.next_u64();
    let n = test.n_rows();
    let scores = par::try_map_range(groups.len(), |g| -> Result<f64> {
        let mut local = rng_from_seed(derive_seed(base_seed, g as u64));
        let mut total = 0.0;
        for _ in 0..n_permutations {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut local);
            let permuted = test.features.select_rows(&perm);
            let frame = test.features.with_columns_from(&permuted, &cols[g])?;
            total += mean(&instance_loss(y, &model.predict(&frame)?, loss)?) - base;
        }
        Ok(total / n_permutations as f64)
    })?;
    Ok(groups
        .iter()
        .zip(scores)
        .map(|(g, score)| FiScore {
            group: g.id.clone(),
            method: FiMethod::Pfi,
            score,
            t: None,
            p: None,
            p_adjusted: None,
        })
        .collect())
}

/// LOCO for one group (the adjusted p equals the raw p).
pub fn loco<R: RngCore + ?Sized>(
    spec: &LearnerSpec,
    train: &Dataset,
    test: &Dataset,
    loss: LossKind,
    group: &FeatureGroup,
    alpha: f64,
    rng: &mut R,
) -> Result<FiScore> {
    Ok(loco_groups(spec, train, test, loss, std::slice::from_ref(group), alpha, rng)?.remove(0))
}

/// LOCO over several groups with one shared full-model fit and Holm
/// adjustment across the groups.
pub fn loco_groups<R: RngCore + ?Sized>(
    spec: &LearnerSpec,
    train: &Dataset,
    test: &Dataset,
    loss: LossKind,
    groups: &[FeatureGroup],
    alpha: f64,
    rng: &mut R,
) -> Result<Vec<FiScore>> {
    let full = fit(spec, train, rng)?;
    loco_with_full(&full, spec, train, test, loss, groups, alpha, rng)
}

/// LOCO reusing an already fitted full model.
#[allow(clippy::too_many_arguments)]
pub fn loco_with_full<R: RngCore + ?Sized>(
    full: &FittedModel,
    spec: &LearnerSpec,
    train: &Dataset,
    test: &Dataset,
    loss: LossKind,
    groups: &[FeatureGroup],
    alpha: f64,
    rng: &mut R,
) -> Result<Vec<FiScore>> {
    resolve_groups(&train.features, groups)?;
    for g in groups {
        if g.columns.len() >= train.features.n_cols() {
            return Err(Error::Config(format!(
                "leaving out `{}` removes every feature",
                g.id
            )));
        }
    }
    let y = &test.target()?.values;
    let base = instance_loss(y, &full.predict(&test.features)?, loss)?;
    let base_seed = rng.next_u64();
    let tests = par::try_map_range(groups.len(), |g| {
        let names: Vec<&str> = groups[g].columns.iter().map(String::as_str).collect();
        let reduced_train = train.with_features(train.features.drop_columns(&names)?)?;
        let reduced_test = test.features.drop_columns(&names)?;
        let mut local = rng_from_seed(derive_seed(base_seed, g as u64));
        let reduced = fit(spec, &reduced_train, &mut local)?;
        let after = instance_loss(y, &reduced.predict(&reduced_test)?, loss)?;
        let delta: Vec<f64> = after.iter().zip(&base).map(|(a, b)| a - b).collect();
        paired_t_test_one_sided(&delta, alpha)
    })?;
    let adjusted = holm_adjust(&tests.iter().map(|t| t.p).collect::<Vec<_>>())?;
    Ok(groups
        .iter()
        .zip(tests)
        .zip(adjusted)
        .map(|((g, t), adj)| FiScore {
            group: g.id.clone(),
            method: FiMethod::Loco,
            score: t.mean,
            t: Some(t.t),
            p: Some(t.p),
            p_adjusted: Some(adj),
        })
        .collect())
}
