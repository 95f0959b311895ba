//! Replicate-level evaluation: rejection rates, top-k detection, ranking
//! AUC, model validation and long-format aggregation.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of p-values at or below `alpha`.
pub fn rejection_rate(p_values: &[f64], alpha: f64) -> Result<f64> {
    if p_values.is_empty() {
        return Err(Error::TooFewRows("rejection rate of no p-values".into()));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Config(format!("p-value {p} outside [0, 1]")));
    }
    Ok(p_values.iter().filter(|&&p| p <= alpha).count() as f64 / p_values.len() as f64)
}

/// Per-feature rejection rates; `p_values[r][j]` is replicate `r`, feature `j`.
pub fn rejection_rates(p_values: &[Vec<f64>], alpha: f64) -> Result<Vec<f64>> {
    let first = p_values
        .first()
        .ok_or_else(|| Error::TooFewRows("no replicates".into()))?;
    if p_values.iter().any(|r| r.len() != first.len()) {
        return Err(Error::Dimension("replicates have different feature counts".into()));
    }
    (0..first.len())
        .map(|j| rejection_rate(&p_values.iter().map(|r| r[j]).collect::<Vec<_>>(), alpha))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub sensitivity: f64,
    pub one_minus_specificity: f64,
}

fn check_scores(scores: &[f64], relevant: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != relevant.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} flags",
            scores.len(),
            relevant.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite(format!("score {i}")));
    }
    let pos = relevant.iter().filter(|&&r| r).count();
    Ok((pos, relevant.len() - pos))
}

/// Feature indices from highest to lowest score; ties keep index order.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Membership in the top `k` of [`ranking`].
pub fn top_k_mask(scores: &[f64], k: usize) -> Vec<bool> {
    let mut mask = vec![false; scores.len()];
    for &j in ranking(scores).iter().take(k) {
        mask[j] = true;
    }
    mask
}

/// Sensitivity and false positive rate of calling the top `k` features
/// relevant.
pub fn top_k_detection(scores: &[f64], relevant: &[bool], k: usize) -> Result<Detection> {
    let (pos, neg) = check_scores(scores, relevant)?;
    if k == 0 || k >= scores.len() {
        return Err(Error::Config(format!(
            "k must lie in 1..{}, got {k}",
            scores.len()
        )));
    }
    if pos == 0 || neg == 0 {
        return Err(Error::Config("detection needs relevant and irrelevant features".into()));
    }
    let mask = top_k_mask(scores, k);
    let tp = mask.iter().zip(relevant).filter(|(&m, &r)| m && r).count();
    let fp = mask.iter().zip(relevant).filter(|(&m, &r)| m && !r).count();
    Ok(Detection {
        sensitivity: tp as f64 / pos as f64,
        one_minus_specificity: fp as f64 / neg as f64,
    })
}

/// Probability that a relevant feature outscores an irrelevant one, ties
/// counting one half.
pub fn auc_rank(scores: &[f64], relevant: &[bool]) -> Result<f64> {
    let (pos, neg) = check_scores(scores, relevant)?;
    if pos == 0 || neg == 0 {
        return Err(Error::Config("AUC needs relevant and irrelevant features".into()));
    }
    let mut wins = 0.0;
    for (i, _) in relevant.iter().enumerate().filter(|(_, &r)| r) {
        for (j, _) in relevant.iter().enumerate().filter(|(_, &r)| !r) {
            wins += match scores[i].total_cmp(&scores[j]) {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            };
        }
    }
    Ok(wins / (pos * neg) as f64)
}

/// Signed discrepancy `value - oracle`.
pub fn validate_model(value: f64, oracle: f64) -> f64 {
    value - oracle
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::TooFewRows("summary of no values".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (n - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    };
    Ok(Summary {
        n,
        mean,
        sd,
        min: s[0],
        q25: q(0.25),
        median: q(0.5),
        q75: q(0.75),
        max: s[n - 1],
    })
}

/// Scores of one method on one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub scenario: String,
    pub n: usize,
    pub method: String,
    pub replicate: u64,
    pub features: Vec<String>,
    pub scores: Vec<f64>,
    /// Adjusted or raw p-values, for methods that test.
    #[serde(default)]
    pub p_values: Option<Vec<f64>>,
    pub relevant: Vec<bool>,
    /// Held-out R^2 or accuracy of the analyzed model.
    #[serde(default)]
    pub validation: Option<f64>,
    #[serde(default)]
    pub oracle: Option<f64>,
}

impl ReplicateOutcome {
    fn check(&self) -> Result<()> {
        let p = self.features.len();
        if p == 0 {
            return Err(Error::Config("replicate outcome has no features".into()));
        }
        if self.scores.len() != p
            || self.relevant.len() != p
            || self.p_values.as_ref().is_some_and(|v| v.len() != p)
        {
            return Err(Error::Dimension(format!(
                "replicate {} of `{}` has inconsistent lengths",
                self.replicate, self.method
            )));
        }
        Ok(())
    }
}

/// One row of the long-format summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub scenario: String,
    pub n: usize,
    pub method: String,
    /// Feature name, or `*` for method-level metrics.
    pub feature: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateOptions {
    pub alpha: f64,
    /// Top-k size; the number of relevant features when unset.
    pub k: Option<usize>,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        AggregateOptions { alpha: 0.05, k: None }
    }
}

/// Aggregates outcomes per (scenario, n, method), in sorted key order.
///
/// Per feature: `mean_score`, `sd_score`, `rejection_rate` (tested methods)
/// and `top_k_rate`. Per method (`feature = "*"`): `replicates`, `auc_mean`,
/// `auc_sd`, `sensitivity_mean`, `one_minus_specificity_mean`,
/// `validation_mean`, `discrepancy_mean`, `discrepancy_sd`.
pub fn aggregate(outcomes: &[ReplicateOutcome], opts: &AggregateOptions) -> Result<Vec<SummaryRecord>> {
    if outcomes.is_empty() {
        return Err(Error::TooFewRows("no replicate outcomes".into()));
    }
    let mut cells: BTreeMap<(String, usize, String), Vec<&ReplicateOutcome>> = BTreeMap::new();
    for o in outcomes {
        o.check()?;
        cells
            .entry((o.scenario.clone(), o.n, o.method.clone()))
            .or_default()
            .push(o);
    }
    let mut out = Vec::new();
    for ((scenario, n, method), mut reps) in cells {
        reps.sort_by_key(|o| o.replicate);
        let features = &reps[0].features;
        if reps.iter().any(|o| &o.features != features) {
            return Err(Error::Dimension(format!(
                "replicates of `{method}` disagree on features"
            )));
        }
        let mut push = |feature: &str, metric: &str, value: f64| {
            out.push(SummaryRecord {
                scenario: scenario.clone(),
                n,
                method: method.clone(),
                feature: feature.to_string(),
                metric: metric.to_string(),
                value,
            })
        };
        push("*", "replicates", reps.len() as f64);
        let tested = reps.iter().all(|o| o.p_values.is_some());
        for (j, name) in features.iter().enumerate() {
            let s = summarize(&reps.iter().map(|o| o.scores[j]).collect::<Vec<_>>())?;
            push(name, "mean_score", s.mean);
            push(name, "sd_score", s.sd);
            if tested {
                let p: Vec<f64> = reps.iter().map(|o| o.p_values.as_ref().unwrap()[j]).collect();
                push(name, "rejection_rate", rejection_rate(&p, opts.alpha)?);
            }
        }
        let mut aucs = Vec::new();
        let mut sens = Vec::new();
        let mut fpr = Vec::new();
        let mut topk = vec![0.0; features.len()];
        for o in &reps {
            let pos = o.relevant.iter().filter(|&&r| r).count();
            let k = opts.k.unwrap_or(pos);
            if pos == 0 || pos == o.relevant.len() || k == 0 || k >= o.relevant.len() {
                continue;
            }
            aucs.push(auc_rank(&o.scores, &o.relevant)?);
            let d = top_k_detection(&o.scores, &o.relevant, k)?;
            sens.push(d.sensitivity);
            fpr.push(d.one_minus_specificity);
            for (t, m) in topk.iter_mut().zip(top_k_mask(&o.scores, k)) {
                *t += m as u8 as f64;
            }
        }
        if !aucs.is_empty() {
            let a = summarize(&aucs)?;
            push("*", "auc_mean", a.mean);
            push("*", "auc_sd", a.sd);
            push("*", "sensitivity_mean", summarize(&sens)?.mean);
            push("*", "one_minus_specificity_mean", summarize(&fpr)?.mean);
            for (name, t) in features.iter().zip(&topk) {
                push(name, "top_k_rate", t / aucs.len() as f64);
            }
        }
        let validations: Vec<f64> = reps.iter().filter_map(|o| o.validation).collect();
        if !validations.is_empty() {
            push("*", "validation_mean", summarize(&validations)?.mean);
        }
        let disc: Vec<f64> = reps
            .iter()
            .filter_map(|o| Some(validate_model(o.validation?, o.oracle?)))
            .collect();
        if !disc.is_empty() {
            let d = summarize(&disc)?;
            push("*", "discrepancy_mean", d.mean);
            push("*", "discrepancy_sd", d.sd);
        }
    }
    Ok(out)
}

/// Writes records as CSV with header `scenario,n,method,feature,metric,value`.
pub fn write_summary_csv<W: Write>(records: &[SummaryRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Looks up one aggregated value.
pub fn find_metric<'a>(
    records: &'a [SummaryRecord],
    method: &str,
    feature: &str,
    metric: &str,
) -> Option<&'a SummaryRecord> {
    records
        .iter()
        .find(|r| r.method == method && r.feature == feature && r.metric == metric)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_worked_example() {
        let auc = auc_rank(&[3.0, 1.0, 2.0, 0.0], &[true, true, false, false]).unwrap();
        assert_eq!(auc, 0.75);
        assert_eq!(auc_rank(&[1.0; 4], &[true, true, false, false]).unwrap(), 0.5);
        assert!(auc_rank(&[1.0, 2.0], &[true, true]).is_err());
    }

    #[test]
    fn detection_examples() {
        let relevant: Vec<bool> = (0..12).map(|j| j < 6).collect();
        let good: Vec<f64> = (0..12).map(|j| -(j as f64)).collect();
        let d = top_k_detection(&good, &relevant, 6).unwrap();
        assert_eq!((d.sensitivity, d.one_minus_specificity), (1.0, 0.0));
        let bad: Vec<f64> = (0..12).map(|j| j as f64).collect();
        let d = top_k_detection(&bad, &relevant, 6).unwrap();
        assert_eq!((d.sensitivity, d.one_minus_specificity), (0.0, 1.0));
    }

    #[test]
    fn summary_of_two() {
        let s = summarize(&[-0.1, 0.1]).unwrap();
        assert!(s.mean.abs() < 1e-15);
        assert!((s.sd - 0.141_421_356).abs() < 1e-8);
        assert_eq!(summarize(&[0.3]).unwrap().sd, 0.0);
    }
}
