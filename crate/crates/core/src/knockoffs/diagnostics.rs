use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::Result;
use crate::tabular::{one_hot_encode, Column, Frame};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelDistance {
    pub column: String,
    pub total_variation: f64,
}

/// Moment discrepancies between features and their knockoffs, computed on
/// the one-hot encoding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnockoffDiagnostics {
    pub n_rows: usize,
    pub max_mean_diff: f64,
    /// max |cov(X) - cov(X~)|
    pub max_cov_diff: f64,
    /// max |cov(X_j, X~_k) - cov(X_j, X_k)| over columns of different groups
    pub max_cross_cov_diff: f64,
    pub level_tv: Vec<LevelDistance>,
    pub threshold: f64,
    /// Names of the metrics above `threshold`.
    pub flagged: Vec<String>,
}

fn center(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = m.clone();
    for mut col in c.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    c
}

pub fn knockoff_diagnostics(x: &Frame, xk: &Frame, threshold: f64) -> Result<KnockoffDiagnostics> {
    x.check_compatible(xk)?;
    let a = one_hot_encode(x);
    let b = one_hot_encode(xk);
    let n = x.n_rows();
    let denom = (n.max(2) - 1) as f64;
    let q = a.n_cols();

    let max_mean_diff = (0..q)
        .map(|j| (a.values.column(j).mean() - b.values.column(j).mean()).abs())
        .fold(0.0, f64::max);

    let ca = center(&a.values);
    let cb = center(&b.values);
    let cov_x = ca.tr_mul(&ca) / denom;
    let cov_k = cb.tr_mul(&cb) / denom;
    let cross = ca.tr_mul(&cb) / denom;
    let max_cov_diff = (&cov_x - &cov_k).amax();

    let mut group_of = vec![0; q];
    for (g, grp) in a.groups.iter().enumerate() {
        for j in grp.range.clone() {
            group_of[j] = g;
        }
    }
    let mut max_cross_cov_diff: f64 = 0.0;
    for j in 0..q {
        for k in 0..q {
            if group_of[j] != group_of[k] {
                max_cross_cov_diff = max_cross_cov_diff.max((cross[(j, k)] - cov_x[(j, k)]).abs());
            }
        }
    }

    let mut level_tv = Vec::new();
    for (s, (c, ck)) in x.schema().iter().zip(x.columns().iter().zip(xk.columns())) {
        if let (Some(levels), Column::Categorical(u), Column::Categorical(v)) = (s.levels(), c, ck) {
            let mut fu = vec![0.0; levels.len()];
            let mut fv = vec![0.0; levels.len()];
            for &l in u {
                fu[l as usize] += 1.0 / n as f64;
            }
            for &l in v {
                fv[l as usize] += 1.0 / n as f64;
            }
            let tv = 0.5 * fu.iter().zip(&fv).map(|(p, q)| (p - q).abs()).sum::<f64>();
            level_tv.push(LevelDistance {
                column: s.name.clone(),
                total_variation: tv,
            });
        }
    }

    let mut flagged = Vec::new();
    for (name, v) in [
        ("max_mean_diff", max_mean_diff),
        ("max_cov_diff", max_cov_diff),
        ("max_cross_cov_diff", max_cross_cov_diff),
    ] {
        if v > threshold {
            flagged.push(name.to_string());
        }
    }
    for d in &level_tv {
        if d.total_variation > threshold {
            flagged.push(format!("level_tv:{}", d.column));
        }
    }

    Ok(KnockoffDiagnostics {
        n_rows: n,
        max_mean_diff,
        max_cov_diff,
        max_cross_cov_diff,
        level_tv,
        threshold,
        flagged,
    })
}
