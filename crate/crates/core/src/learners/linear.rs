//! Ordinary least squares on `[1, one-hot(X)]`.
//!
//! The full one-hot design is rank deficient; the SVD solve returns the
//! minimum-norm coefficients, which give the same fitted values as any
//! reference-level parameterization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tabular::{one_hot_encode, Frame};

/// `[1, one-hot(frame)]`.
pub fn design_with_intercept(frame: &Frame) -> DMatrix<f64> {
    let enc = one_hot_encode(frame);
    let n = frame.n_rows();
    let mut x = DMatrix::from_element(n, enc.n_cols() + 1, 1.0);
    x.columns_mut(1, enc.n_cols()).copy_from(&enc.values);
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Intercept first, then one coefficient per encoded column.
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn fit(frame: &Frame, y: &[f64]) -> Result<LinearModel> {
        let x = design_with_intercept(frame);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear model design".into()));
        }
        let b = DVector::from_column_slice(y);
        let dim = x.nrows().max(x.ncols()) as f64;
        let svd = x.svd(true, true);
        let smax = svd.singular_values.max();
        let eps = smax * 1e-10 * dim;
        let beta = svd
            .solve(&b, eps.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::Numeric(format!("least squares solve failed: {e}")))?;
        Ok(LinearModel {
            coefficients: beta.iter().copied().collect(),
        })
    }

    pub fn predict(&self, frame: &Frame) -> Vec<f64> {
        let x = design_with_intercept(frame);
        let beta = DVector::from_column_slice(&self.coefficients);
        (x * beta).iter().copied().collect()
    }
}
