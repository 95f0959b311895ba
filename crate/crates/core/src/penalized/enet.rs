use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use super::{
    check_finite, check_row, column_scaling, fold_labels, soft_threshold, Conditional,
    ConditionalModel, PenaltyConfig,
};
use crate::error::{Error, Result};

/// Floor on the residual standard deviation of a fitted elastic net.
pub const SD_FLOOR: f64 = 1e-6;

const CD_TOL: f64 = 1e-11;
const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElasticNetFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
    pub residual_sd: f64,
}

impl ElasticNetFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.coefficients)
                .map(|(x, b)| x * b)
                .sum::<f64>()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let b = DVector::from_column_slice(&self.coefficients);
        (x * b).iter().map(|v| v + self.intercept).collect()
    }
}

impl ConditionalModel for ElasticNetFit {
    fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    fn conditional(&self, row: &[f64]) -> Result<Conditional> {
        check_row(self.coefficients.len(), row)?;
        Ok(Conditional::Gaussian {
            mean: self.predict_row(row),
            sd: self.residual_sd,
        })
    }
}

/// Design pre-scaled once with global means / sds so that subset moments
/// can be formed without cancellation.
struct Scaled {
    u: DMatrix<f64>,
    v: Vec<f64>,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: f64,
}

impl Scaled {
    fn new(x: &DMatrix<f64>, y: &[f64]) -> Scaled {
        let n = x.nrows();
        let all: Vec<usize> = (0..n).collect();
        let (x_mean, sds) = column_scaling(x, &all);
        let x_scale: Vec<f64> = sds.iter().map(|s| s.unwrap_or(1.0)).collect();
        let mut u = x.clone();
        for (j, mut col) in u.column_iter_mut().enumerate() {
            for val in col.iter_mut() {
                *val = (*val - x_mean[j]) / x_scale[j];
            }
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let v = y.iter().map(|t| t - y_mean).collect();
        Scaled {
            u,
            v,
            x_mean,
            x_scale,
            y_mean,
        }
    }

    fn q(&self) -> usize {
        self.u.ncols()
    }
}

/// Raw sums over a row subset.
#[derive(Clone)]
struct Sums {
    n: f64,
    su: DVector<f64>,
    suu: DMatrix<f64>,
    sv: f64,
    suv: DVector<f64>,
}

impl Sums {
    fn over(s: &Scaled, rows: &[usize]) -> Sums {
        let sub = s.u.select_rows(rows);
        let v = DVector::from_iterator(rows.len(), rows.iter().map(|&i| s.v[i]));
        Sums {
            n: rows.len() as f64,
            su: sub.row_sum().transpose(),
            suu: sub.tr_mul(&sub),
            sv: v.sum(),
            suv: sub.tr_mul(&v),
        }
    }

    fn minus(&self, other: &Sums) -> Sums {
        Sums {
            n: self.n - other.n,
            su: &self.su - &other.su,
            suu: &self.suu - &other.suu,
            sv: self.sv - other.sv,
            suv: &self.suv - &other.suv,
        }
    }
}

/// Standardized least-squares problem over one subset.
struct Problem {
    gram: DMatrix<f64>,
    corr: Vec<f64>,
    scale: Vec<f64>,
    active: Vec<bool>,
    mean_u: Vec<f64>,
    mean_v: f64,
}

impl Problem {
    fn from_sums(s: &Sums) -> Problem {
        let q = s.su.len();
        let mean_u: Vec<f64> = s.su.iter().map(|v| v / s.n).collect();
        let mean_v = s.sv / s.n;
        let mut cov = s.suu.clone() / s.n;
        for a in 0..q {
            for b in 0..q {
                cov[(a, b)] -= mean_u[a] * mean_u[b];
            }
        }
        let mut scale = vec![1.0; q];
        let mut active = vec![false; q];
        for j in 0..q {
            let c = cov[(j, j)];
            if c > 1e-20 {
                scale[j] = c.sqrt();
                active[j] = true;
            }
        }
        let mut gram = DMatrix::zeros(q, q);
        let mut corr = vec![0.0; q];
        for a in 0..q {
            if !active[a] {
                continue;
            }
            corr[a] = (s.suv[a] / s.n - mean_u[a] * mean_v) / scale[a];
            for b in 0..q {
                if active[b] {
                    gram[(a, b)] = cov[(a, b)] / (scale[a] * scale[b]);
                }
            }
        }
        Problem {
            gram,
            corr,
            scale,
            active,
            mean_u,
            mean_v,
        }
    }

    fn lambda_max(&self, alpha: f64) -> f64 {
        let m = self
            .corr
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(c, _)| c.abs())
            .fold(0.0, f64::max);
        m / alpha.max(1e-3)
    }

    /// Cyclic coordinate descent on the Gram form, warm-started from `beta`.
    fn solve(&self, lambda: f64, alpha: f64, beta: &mut [f64]) {
        let q = beta.len();
        let mut grad: Vec<f64> = (0..q)
            .map(|j| {
                self.corr[j]
                    - (0..q)
                        .map(|k| self.gram[(j, k)] * beta[k])
                        .sum::<f64>()
            })
            .collect();
        let l1 = lambda * alpha;
        let l2 = lambda * (1.0 - alpha);
        for _ in 0..MAX_SWEEPS {
            let mut max_delta: f64 = 0.0;
            for j in 0..q {
                if !self.active[j] {
                    continue;
                }
                let gjj = self.gram[(j, j)];
                let z = grad[j] + gjj * beta[j];
                let new = soft_threshold(z, l1) / (gjj + l2);
                let delta = new - beta[j];
                if delta != 0.0 {
                    beta[j] = new;
                    for (k, gk) in grad.iter_mut().enumerate() {
                        *gk -= self.gram[(k, j)] * delta;
                    }
                    max_delta = max_delta.max(delta.abs());
                }
            }
            if max_delta < CD_TOL {
                break;
            }
        }
    }

    /// Coefficients in the globally scaled `u` space.
    fn to_u(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter()
            .zip(&self.scale)
            .zip(&self.active)
            .map(|((b, s), &a)| if a { b / s } else { 0.0 })
            .collect()
    }

    fn predict_u(&self, beta_u: &[f64], urow: impl Iterator<Item = f64>) -> f64 {
        self.mean_v
            + urow
                .zip(&self.mean_u)
                .zip(beta_u)
                .map(|((u, m), b)| (u - m) * b)
                .sum::<f64>()
    }
}

fn finish(s: &Scaled, x: &DMatrix<f64>, y: &[f64], p: &Problem, beta: &[f64], alpha: f64, lambda: f64) -> ElasticNetFit {
    let beta_u = p.to_u(beta);
    let coefficients: Vec<f64> = beta_u
        .iter()
        .zip(&s.x_scale)
        .map(|(b, sc)| b / sc)
        .collect();
    let mean_x: Vec<f64> = (0..s.q())
        .map(|j| s.x_mean[j] + s.x_scale[j] * p.mean_u[j])
        .collect();
    let intercept = s.y_mean + p.mean_v
        - mean_x
            .iter()
            .zip(&coefficients)
            .map(|(m, b)| m * b)
            .sum::<f64>();
    let mut fit = ElasticNetFit {
        intercept,
        coefficients,
        alpha,
        lambda,
        residual_sd: SD_FLOOR,
    };
    let pred = fit.predict(x);
    let n = y.len();
    let resid: Vec<f64> = y.iter().zip(&pred).map(|(t, f)| t - f).collect();
    let rm = resid.iter().sum::<f64>() / n as f64;
    let ss: f64 = resid.iter().map(|r| (r - rm).powi(2)).sum();
    let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
    fit.residual_sd = sd.max(SD_FLOOR);
    fit
}

fn check_inputs(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows, response {}",
            x.nrows(),
            y.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::TooFewRows("elastic net needs at least 2 rows".into()));
    }
    check_finite(x, y)
}

/// Smallest penalty at which every standardized coefficient is zero.
pub fn gaussian_lambda_max(x: &DMatrix<f64>, y: &[f64], alpha: f64) -> Result<f64> {
    check_inputs(x, y)?;
    let s = Scaled::new(x, y);
    let all: Vec<usize> = (0..y.len()).collect();
    Ok(Problem::from_sums(&Sums::over(&s, &all)).lambda_max(alpha))
}

/// Elastic net at a fixed penalty.
pub fn fit_elastic_net(x: &DMatrix<f64>, y: &[f64], alpha: f64, lambda: f64) -> Result<ElasticNetFit> {
    check_inputs(x, y)?;
    if !(0.0..=1.0).contains(&alpha) || !(lambda >= 0.0) {
        return Err(Error::Config(format!("bad penalty alpha={alpha} lambda={lambda}")));
    }
    let s = Scaled::new(x, y);
    let all: Vec<usize> = (0..y.len()).collect();
    let p = Problem::from_sums(&Sums::over(&s, &all));
    let mut beta = vec![0.0; s.q()];
    p.solve(lambda, alpha, &mut beta);
    Ok(finish(&s, x, y, &p, &beta, alpha, lambda))
}

/// Elastic net with lambda chosen by cross-validated mean squared error.
pub fn fit_elastic_net_cv<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &[f64],
    cfg: &PenaltyConfig,
    rng: &mut R,
) -> Result<ElasticNetFit> {
    check_inputs(x, y)?;
    cfg.validate()?;
    let n = y.len();
    let s = Scaled::new(x, y);
    let all: Vec<usize> = (0..n).collect();
    let total = Sums::over(&s, &all);
    let full = Problem::from_sums(&total);
    let lambdas = cfg.grid(full.lambda_max(cfg.alpha));

    let chosen = if lambdas.len() > 1 && n >= 2 * cfg.n_folds {
        let labels = fold_labels(n, cfg.n_folds, rng);
        let mut sse = vec![0.0; lambdas.len()];
        for f in 0..cfg.n_folds {
            let held: Vec<usize> = (0..n).filter(|&i| labels[i] == f).collect();
            let train = total.minus(&Sums::over(&s, &held));
            let p = Problem::from_sums(&train);
            let mut beta = vec![0.0; s.q()];
            for (k, &lam) in lambdas.iter().enumerate() {
                p.solve(lam, cfg.alpha, &mut beta);
                let bu = p.to_u(&beta);
                for &i in &held {
                    let pred = p.predict_u(&bu, s.u.row(i).iter().copied());
                    sse[k] += (s.v[i] - pred).powi(2);
                }
            }
        }
        sse.iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (k, &e)| if e < best.1 { (k, e) } else { best })
            .0
    } else {
        lambdas.len() - 1
    };

    let mut beta = vec![0.0; s.q()];
    for &lam in &lambdas[..=chosen] {
        full.solve(lam, cfg.alpha, &mut beta);
    }
    Ok(finish(&s, x, y, &full, &beta, cfg.alpha, lambdas[chosen]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line_at_zero_penalty() {
        let x = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let fit = fit_elastic_net(&x, &y, 0.5, 0.0).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.intercept, 0.0, epsilon = 1e-6);
        assert_eq!(fit.residual_sd, SD_FLOOR);
        match fit.conditional(&[4.0]).unwrap() {
            Conditional::Gaussian { mean, sd } => {
                assert_abs_diff_eq!(mean, 8.0, epsilon = 1e-6);
                assert_eq!(sd, SD_FLOOR);
            }
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn full_shrinkage_above_lambda_max() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, 2.0, -1.0, 3.0, 0.0, 4.0, 2.0]);
        let y = vec![1.0, 3.0, 2.0, 6.0];
        let lmax = gaussian_lambda_max(&x, &y, 0.5).unwrap();
        let fit = fit_elastic_net(&x, &y, 0.5, lmax * 1.0001).unwrap();
        assert!(fit.coefficients.iter().all(|&b| b == 0.0));
        assert_abs_diff_eq!(fit.intercept, 3.0, epsilon = 1e-12);
        let fit = fit_elastic_net(&x, &y, 0.5, lmax * 0.9).unwrap();
        assert!(fit.coefficients.iter().any(|&b| b != 0.0));
    }

    #[test]
    fn intercept_only_design() {
        let x = DMatrix::zeros(4, 0);
        let y = vec![2.0, 4.0, 2.0, 4.0];
        let fit = fit_elastic_net(&x, &y, 0.5, 0.1).unwrap();
        assert_eq!(fit.intercept, 3.0);
        let sd = (4.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(fit.residual_sd, sd, epsilon = 1e-12);
        assert!(fit.conditional(&[1.0]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, f64::NAN]);
        assert!(matches!(
            fit_elastic_net(&x, &[1.0, 2.0], 0.5, 0.1),
            Err(Error::NonFinite(_))
        ));
    }
}
