//! Elastic-net penalized Gaussian and multinomial regression.
//!
//! Both solvers standardize the design internally (population sd), penalize
//! the standardized coefficients and report coefficients on the original
//! scale. The penalty is `lambda * (alpha * |b|_1 + (1 - alpha) / 2 * |b|_2^2)`;
//! intercepts are never penalized.
//!
//! Penalty strength is picked by K-fold cross-validation over a log-spaced
//! grid from `lambda_max` down to `lambda_min_ratio * lambda_max`.

mod enet;
mod multinomial;

pub use enet::{
    fit_elastic_net, fit_elastic_net_cv, gaussian_lambda_max, ElasticNetFit, SD_FLOOR,
};
pub use multinomial::{
    fit_multinomial_enet, fit_multinomial_enet_cv, multinomial_lambda_max, softmax,
    MultinomialConfig, MultinomialFit,
};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lambda selection policy shared by both solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub alpha: f64,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub n_folds: usize,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            alpha: 0.5,
            n_lambda: 20,
            lambda_min_ratio: 1e-3,
            n_folds: 5,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.n_lambda == 0 || self.n_folds < 2 {
            return Err(Error::Config("need n_lambda >= 1 and n_folds >= 2".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::Config("lambda_min_ratio must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Descending log-spaced grid starting at `lambda_max`.
    pub fn grid(&self, lambda_max: f64) -> Vec<f64> {
        if self.n_lambda == 1 || lambda_max <= 0.0 {
            return vec![lambda_max.max(0.0)];
        }
        let lo = self.lambda_min_ratio.ln();
        (0..self.n_lambda)
            .map(|k| lambda_max * (lo * k as f64 / (self.n_lambda - 1) as f64).exp())
            .collect()
    }
}

/// Sampling distribution for one row, as used by the sequential sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum Conditional {
    Gaussian { mean: f64, sd: f64 },
    Categorical { probs: Vec<f64> },
}

/// Per-row conditional distribution of a fitted model.
pub trait ConditionalModel {
    fn n_features(&self) -> usize;
    fn conditional(&self, row: &[f64]) -> Result<Conditional>;
}

/// Convenience wrapper matching the fit-agnostic call shape.
pub fn predict_conditional(fit: &dyn ConditionalModel, row: &[f64]) -> Result<Conditional> {
    fit.conditional(row)
}

pub(crate) fn check_row(expected: usize, row: &[f64]) -> Result<()> {
    if row.len() != expected {
        return Err(Error::Dimension(format!(
            "row has {} values, model expects {expected}",
            row.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_finite(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response".into()));
    }
    Ok(())
}

/// Random fold label per row, balanced to within one row.
pub(crate) fn fold_labels<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut labels = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        labels[i] = pos % k;
    }
    labels
}

/// Column means and population sds; `None` marks (near-)constant columns.
pub(crate) fn column_scaling(x: &DMatrix<f64>, rows: &[usize]) -> (Vec<f64>, Vec<Option<f64>>) {
    let n = rows.len() as f64;
    let q = x.ncols();
    let mut means = vec![0.0; q];
    let mut sds = vec![None; q];
    for j in 0..q {
        let col = x.column(j);
        let m = rows.iter().map(|&i| col[i]).sum::<f64>() / n;
        let v = rows.iter().map(|&i| (col[i] - m).powi(2)).sum::<f64>() / n;
        means[j] = m;
        let sd = v.sqrt();
        if sd > 1e-10 * m.abs().max(1.0) {
            sds[j] = Some(sd);
        }
    }
    (means, sds)
}

#[inline]
pub(crate) fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = PenaltyConfig::default().grid(2.0);
        assert_eq!(g.len(), 20);
        assert!((g[0] - 2.0).abs() < 1e-12);
        assert!((g[19] - 2e-3).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn folds_balanced() {
        let mut rng = crate::seed::rng_from_seed(3);
        let f = fold_labels(23, 5, &mut rng);
        let mut counts = [0; 5];
        for l in f {
            counts[l] += 1;
        }
        assert!(counts.iter().all(|&c| c == 4 || c == 5));
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn invalid_alpha() {
        let c = PenaltyConfig {
            alpha: 1.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
