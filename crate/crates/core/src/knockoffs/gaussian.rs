//! Second-order Gaussian knockoffs with the equicorrelated construction.
//!
//! With `D = diag(s)`, knockoffs are drawn row-wise from
//! `N(x - (x - mu) Sigma^-1 D, 2D - D Sigma^-1 D)`, the conditional law of
//! the second half of `N(0, [[Sigma, Sigma - D], [Sigma - D, Sigma]])`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{KnockoffMatrix, Provenance};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::tabular::{Column, ColumnSchema, Frame};

const SHRINKAGE_STEPS: [f64; 6] = [0.0, 0.01, 0.05, 0.1, 0.25, 0.5];
const MIN_EIGENVALUE: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct GaussianKnockoffParams {
    pub mu_hat: Vec<f64>,
    /// Shrunk sample covariance; rows/columns of constant columns are zero.
    #[serde(skip)]
    pub sigma_hat: DMatrix<f64>,
    pub s_diag: Vec<f64>,
    /// Shrinkage weight toward the diagonal that was needed.
    pub shrinkage: f64,
    /// Columns with positive variance; the rest are copied unchanged.
    pub active: Vec<usize>,
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Estimates mean, shrunk covariance and the equicorrelated `s` vector.
pub fn estimate_gaussian_params(x: &DMatrix<f64>) -> Result<GaussianKnockoffParams> {
    let n = x.nrows();
    let q = x.ncols();
    if n <= 2 {
        return Err(Error::TooFewRows(format!(
            "Gaussian knockoffs need more than 2 rows, got {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("knockoff input".into()));
    }
    let mu_hat: Vec<f64> = (0..q).map(|j| x.column(j).mean()).collect();
    let mut centered = x.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mu_hat[j]);
    }
    let cov = centered.tr_mul(&centered) / (n - 1) as f64;
    let active: Vec<usize> = (0..q)
        .filter(|&j| cov[(j, j)] > 1e-12 * (1.0 + mu_hat[j].abs()).powi(2))
        .collect();
    let qa = active.len();
    let sub = DMatrix::from_fn(qa, qa, |a, b| cov[(active[a], active[b])]);

    let mut chosen = None;
    for &gamma in &SHRINKAGE_STEPS {
        let mut shrunk = sub.clone() * (1.0 - gamma);
        for a in 0..qa {
            shrunk[(a, a)] = sub[(a, a)];
        }
        if min_eigenvalue(&shrunk) >= MIN_EIGENVALUE {
            chosen = Some((gamma, shrunk));
            break;
        }
    }
    let (shrinkage, shrunk) = chosen.ok_or_else(|| {
        Error::Numeric("covariance stays singular after maximal shrinkage".into())
    })?;

    let sd: Vec<f64> = (0..qa).map(|a| shrunk[(a, a)].sqrt()).collect();
    let corr = DMatrix::from_fn(qa, qa, |a, b| shrunk[(a, b)] / (sd[a] * sd[b]));
    let scale = (2.0 * min_eigenvalue(&corr)).clamp(0.0, 1.0);

    let mut sigma_hat = DMatrix::zeros(q, q);
    let mut s_diag = vec![0.0; q];
    for (a, &j) in active.iter().enumerate() {
        s_diag[j] = scale * shrunk[(a, a)];
        for (b, &k) in active.iter().enumerate() {
            sigma_hat[(j, k)] = shrunk[(a, b)];
        }
    }
    Ok(GaussianKnockoffParams {
        mu_hat,
        sigma_hat,
        s_diag,
        shrinkage,
        active,
    })
}

/// Draws one knockoff row per input row.
pub fn sample_gaussian_knockoffs<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    params: &GaussianKnockoffParams,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let q = x.ncols();
    if params.mu_hat.len() != q || params.sigma_hat.ncols() != q {
        return Err(Error::Dimension(format!(
            "knockoff parameters are for {} columns, data has {q}",
            params.mu_hat.len()
        )));
    }
    let act = &params.active;
    let qa = act.len();
    let n = x.nrows();
    let mut out = x.clone();
    if qa == 0 {
        return Ok(out);
    }
    let sigma = DMatrix::from_fn(qa, qa, |a, b| params.sigma_hat[(act[a], act[b])]);
    let s = DVector::from_iterator(qa, act.iter().map(|&j| params.s_diag[j]));
    let chol = Cholesky::new(sigma)
        .ok_or_else(|| Error::Numeric("knockoff covariance is not positive definite".into()))?;
    // A = Sigma^-1 D
    let d = DMatrix::from_diagonal(&s);
    let a = chol.solve(&d);
    let mut v = &d * 2.0 - &d * &a;
    v = (&v + v.transpose()) * 0.5;
    let eig = SymmetricEigen::new(v);
    let root = DMatrix::from_fn(qa, qa, |r, c| {
        eig.eigenvectors[(r, c)] * eig.eigenvalues[c].max(0.0).sqrt()
    });

    let xa = DMatrix::from_fn(n, qa, |i, b| x[(i, act[b])] - params.mu_hat[act[b]]);
    let shift = &xa * &a;
    let noise = DMatrix::from_fn(n, qa, |_, _| rng.sample::<f64, _>(StandardNormal));
    let draw = noise * root.transpose();
    for (b, &j) in act.iter().enumerate() {
        for i in 0..n {
            out[(i, j)] = x[(i, j)] - shift[(i, b)] + draw[(i, b)];
        }
    }
    Ok(out)
}

/// Gaussian knockoffs for an all-continuous frame (typically a one-hot
/// encoding of mixed data).
pub fn gaussian_knockoffs<R: RngCore + ?Sized>(frame: &Frame, rng: &mut R) -> Result<KnockoffMatrix> {
    if !frame.is_all_continuous() {
        return Err(Error::Config(
            "Gaussian knockoffs need continuous columns; one-hot encode categorical data first"
                .into(),
        ));
    }
    let n = frame.n_rows();
    let q = frame.n_cols();
    let x = DMatrix::from_fn(n, q, |i, j| frame.value(i, j));
    let params = estimate_gaussian_params(&x)?;
    let seed = rng.next_u64();
    let mut local = rng_from_seed(seed);
    let xk = sample_gaussian_knockoffs(&x, &params, &mut local)?;
    let schema: Vec<ColumnSchema> = frame.schema().to_vec();
    let columns = (0..q)
        .map(|j| Column::Continuous(xk.column(j).iter().copied().collect()))
        .collect();
    Ok(KnockoffMatrix {
        frame: Frame::new(schema, columns)?,
        provenance: Provenance::Gaussian,
        seed,
    })
}
