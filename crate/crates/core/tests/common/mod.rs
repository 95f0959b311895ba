#![allow(dead_code)]

use cpiseq::tabular::{Column, ColumnSchema, Dataset, Frame, Target};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Continuous frame with columns named x1, x2, ...
pub fn frame(cols: Vec<Vec<f64>>) -> Frame {
    let schema = (0..cols.len()).map(|j| ColumnSchema::continuous(format!("x{}", j + 1))).collect();
    Frame::new(schema, cols.into_iter().map(Column::Continuous).collect()).unwrap()
}

pub fn regression(cols: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
    Dataset::new(frame(cols), Some(Target::continuous("y", y))).unwrap()
}

pub fn matrix_of(frame: &Frame) -> DMatrix<f64> {
    DMatrix::from_fn(frame.n_rows(), frame.n_cols(), |i, j| frame.value(i, j))
}

/// Rows drawn from N(0, sigma).
pub fn mvn<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let l = sigma.clone().cholesky().expect("positive definite").l();
    let z = DMatrix::from_fn(n, sigma.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    z * l.transpose()
}

/// Sample covariance of the columns of `a` against those of `b`.
pub fn cross_cov(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows() as f64;
    let center = |m: &DMatrix<f64>| {
        let mut c = m.clone();
        for mut col in c.column_iter_mut() {
            let mu = col.mean();
            col.add_scalar_mut(-mu);
        }
        c
    };
    center(a).tr_mul(&center(b)) / (n - 1.0)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

pub fn corr(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let sa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>().sqrt();
    let sb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum::<f64>().sqrt();
    cov / (sa * sb)
}

/// Upper 3-sigma binomial band around `p` for `n` trials.
pub fn upper_band(p: f64, n: usize) -> f64 {
    p + 3.0 * (p * (1.0 - p) / n as f64).sqrt()
}
