use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub mean: f64,
    pub se: f64,
    pub t: f64,
    pub df: f64,
    /// `P(T_df > t)` for H0: E[delta] <= 0.
    pub p: f64,
    /// One-sided `1 - alpha` lower confidence bound for the mean.
    pub ci_lower: f64,
}

pub fn cpi_statistic(delta: &[f64]) -> Result<f64> {
    if delta.is_empty() {
        return Err(Error::TooFewRows("CPI of an empty delta vector".into()));
    }
    Ok(delta.iter().sum::<f64>() / delta.len() as f64)
}

/// Upper tail of Student's t with `df` degrees of freedom.
pub fn t_upper_tail(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == f64::NEG_INFINITY {
        return 1.0;
    }
    let half = 0.5 * beta_reg(df / 2.0, 0.5, df / (df + t * t));
    if t > 0.0 {
        half
    } else {
        1.0 - half
    }
}

/// `q` quantile of Student's t.
pub fn t_quantile(q: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Numeric(format!("Student t with {df} df: {e}")))?;
    Ok(dist.inverse_cdf(q))
}

/// One-sided paired t-test of H0: E[delta] <= 0 against E[delta] > 0.
///
/// A zero standard deviation gives `p = 1` when the mean is not positive and
/// `p = 0` otherwise.
pub fn paired_t_test_one_sided(delta: &[f64], alpha: f64) -> Result<TTest> {
    let n = delta.len();
    if n < 2 {
        return Err(Error::TooFewRows(format!(
            "t-test needs at least 2 observations, got {n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if let Some(i) = delta.iter().position(|d| !d.is_finite()) {
        return Err(Error::NonFinite(format!("loss difference {i}")));
    }
    let nf = n as f64;
    let mean = delta.iter().sum::<f64>() / nf;
    let var = delta.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (nf - 1.0);
    let se = (var / nf).sqrt();
    let df = nf - 1.0;
    // Treat spread at rounding level of the mean as zero.
    let (t, p) = if se <= 1e-14 * mean.abs() || se == 0.0 {
        if mean > 0.0 {
            (f64::INFINITY, 0.0)
        } else if mean < 0.0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            (0.0, 1.0)
        }
    } else {
        let t = mean / se;
        (t, t_upper_tail(t, df))
    };
    let ci_lower = mean - t_quantile(1.0 - alpha, df)? * se;
    Ok(TTest {
        mean,
        se,
        t,
        df,
        p,
        ci_lower,
    })
}

/// Holm step-down adjustment; output is in input order.
pub fn holm_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Config(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (k, &i) in order.iter().enumerate() {
        running = running.max(((m - k) as f64 * p_values[i]).min(1.0));
        out[i] = running;
    }
    Ok(out)
}
