//! Logistic regression by damped Newton iterations on `[1, one-hot(X)]`.

use nalgebra::{DMatrix, DVector};

use super::linear::design_with_intercept;
use crate::error::{Error, Result};
use crate::tabular::Frame;

const RIDGE: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean negative log-likelihood, computed from the linear predictor.
fn objective(eta: &DVector<f64>, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    eta.iter()
        .zip(y)
        .map(|(&e, &t)| {
            // log(1 + exp(e)) - t * e
            let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            softplus - t * e
        })
        .sum::<f64>()
        / n
}

impl LogisticModel {
    pub fn fit(frame: &Frame, y: &[f64]) -> Result<LogisticModel> {
        let x = design_with_intercept(frame);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logistic model design".into()));
        }
        Self::fit_design(&x, y)
    }

    pub(crate) fn fit_design(x: &DMatrix<f64>, y: &[f64]) -> Result<LogisticModel> {
        let n = x.nrows();
        let q = x.ncols();
        let nf = n as f64;
        let mut beta = DVector::zeros(q);
        let mut eta = DVector::zeros(n);
        let mut obj = objective(&eta, y);
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..MAX_ITER {
            iterations = it + 1;
            let p: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
            let resid = DVector::from_iterator(n, p.iter().zip(y).map(|(p, t)| p - t));
            let grad = x.tr_mul(&resid) / nf;
            if grad.norm() < GRAD_TOL {
                converged = true;
                break;
            }
            let mut xw = x.clone();
            for (i, mut row) in xw.row_iter_mut().enumerate() {
                row *= (p[i] * (1.0 - p[i])).max(1e-12).sqrt();
            }
            let mut h = xw.tr_mul(&xw) / nf;
            for j in 0..q {
                h[(j, j)] += RIDGE;
            }
            let step = h
                .cholesky()
                .ok_or_else(|| Error::Numeric("logistic Hessian is not positive definite".into()))?
                .solve(&grad);
            let mut t = 1.0;
            loop {
                let cand = &beta - &step * t;
                let cand_eta = x * &cand;
                let cand_obj = objective(&cand_eta, y);
                if cand_obj <= obj + 1e-4 * t * -grad.dot(&step) || t < 1e-10 {
                    beta = cand;
                    eta = cand_eta;
                    obj = cand_obj;
                    break;
                }
                t *= 0.5;
            }
        }
        Ok(LogisticModel {
            coefficients: beta.iter().copied().collect(),
            iterations,
            converged,
        })
    }

    pub fn predict(&self, frame: &Frame) -> Vec<f64> {
        let x = design_with_intercept(frame);
        let beta = DVector::from_column_slice(&self.coefficients);
        (x * beta).iter().map(|&e| sigmoid(e)).collect()
    }
}
